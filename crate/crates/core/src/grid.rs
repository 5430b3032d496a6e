//! Truncated space-time grids and fields living on them.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::MAX_DIM;

/// Strictly increasing nodes along one spatial axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    nodes: Vec<f64>,
    /// `(start, spacing)` when the nodes are equispaced.
    uniform: Option<(f64, f64)>,
}

impl Axis {
    pub fn uniform(min: f64, max: f64, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::Grid(format!("axis needs at least 3 nodes, got {nodes}")));
        }
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Grid(format!("axis bounds must satisfy min < max, got [{min}, {max}]")));
        }
        let h = (max - min) / (nodes - 1) as f64;
        let mut v: Vec<f64> = (0..nodes).map(|i| min + h * i as f64).collect();
        v[nodes - 1] = max;
        Ok(Self {
            nodes: v,
            uniform: Some((min, h)),
        })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Grid("axis needs at least 3 nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Grid("axis nodes must be finite and strictly increasing".into()));
        }
        Ok(Self {
            nodes,
            uniform: None,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn max_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Length of the dual cell around node `i` (half cells at the ends).
    pub fn dual_interval(&self, i: usize) -> (f64, f64) {
        let n = self.nodes.len();
        let lo = if i == 0 {
            self.nodes[0]
        } else {
            0.5 * (self.nodes[i - 1] + self.nodes[i])
        };
        let hi = if i + 1 == n {
            self.nodes[n - 1]
        } else {
            0.5 * (self.nodes[i] + self.nodes[i + 1])
        };
        (lo, hi)
    }

    /// Cell index `i` and fraction `θ ∈ [0,1]` with
    /// `x ≈ (1−θ)·nodes[i] + θ·nodes[i+1]`, clamped to the axis.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.nodes.len();
        let i = match self.uniform {
            Some((x0, h)) => {
                let s = (x - x0) / h;
                if s <= 0.0 {
                    return (0, 0.0);
                }
                (s as usize).min(n - 2)
            }
            None => {
                if x <= self.nodes[0] {
                    return (0, 0.0);
                }
                self.nodes.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2)
            }
        };
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        (i, ((x - a) / (b - a)).clamp(0.0, 1.0))
    }
}

/// Time window `[0, T]` crossed with a tensor-product spatial box.
///
/// Spatial nodes are numbered with the first axis fastest. Quadrature weights
/// that include the density live on the assembled slice operators.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    t_nodes: Vec<f64>,
    t_uniform: Option<f64>,
    axes: Vec<Axis>,
    n_space: usize,
    boundary: Vec<bool>,
}

impl SpaceTimeGrid {
    pub fn new(t_nodes: Vec<f64>, axes: Vec<Axis>) -> Result<Self> {
        if t_nodes.len() < 2 {
            return Err(Error::Grid("need at least two time nodes".into()));
        }
        if t_nodes.windows(2).any(|w| !(w[1] > w[0])) || t_nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Grid("time nodes must be finite and strictly increasing".into()));
        }
        if t_nodes[0] != 0.0 {
            return Err(Error::Grid("time window must start at 0".into()));
        }
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(Error::Grid(format!("need 1 or 2 spatial axes, got {}", axes.len())));
        }
        let n_space = axes.iter().map(Axis::len).product();
        let mut grid = Self {
            t_nodes,
            t_uniform: None,
            axes,
            n_space,
            boundary: Vec::new(),
        };
        grid.boundary = (0..n_space)
            .map(|node| {
                let idx = grid.multi_index(node);
                grid.axes
                    .iter()
                    .enumerate()
                    .any(|(d, ax)| idx[d] == 0 || idx[d] + 1 == ax.len())
            })
            .collect();
        Ok(grid)
    }

    pub fn uniform(t_max: f64, t_steps: usize, axes: Vec<Axis>) -> Result<Self> {
        if t_steps == 0 || !(t_max > 0.0) {
            return Err(Error::Grid("need t_max > 0 and t_steps >= 1".into()));
        }
        let dt = t_max / t_steps as f64;
        let mut t: Vec<f64> = (0..=t_steps).map(|k| dt * k as f64).collect();
        t[t_steps] = t_max;
        let mut grid = Self::new(t, axes)?;
        grid.t_uniform = Some(dt);
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn t_max(&self) -> f64 {
        self.t_nodes[self.t_nodes.len() - 1]
    }

    pub fn n_time(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.t_nodes[k + 1] - self.t_nodes[k]
    }

    pub fn max_dt(&self) -> f64 {
        (0..self.n_time() - 1).map(|k| self.dt(k)).fold(0.0, f64::max)
    }

    pub fn max_dx(&self) -> f64 {
        self.axes.iter().map(Axis::max_spacing).fold(0.0, f64::max)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn n_nodes(&self) -> usize {
        self.n_space * self.n_time()
    }

    pub fn shape(&self) -> [usize; MAX_DIM] {
        let mut s = [1; MAX_DIM];
        for (d, ax) in self.axes.iter().enumerate() {
            s[d] = ax.len();
        }
        s
    }

    pub fn multi_index(&self, node: usize) -> [usize; MAX_DIM] {
        let n0 = self.axes[0].len();
        [node % n0, node / n0]
    }

    pub fn node_index(&self, idx: [usize; MAX_DIM]) -> usize {
        idx[0] + self.axes[0].len() * idx[1]
    }

    /// Offset between neighbouring nodes along axis `d`.
    pub fn stride(&self, d: usize) -> usize {
        if d == 0 {
            1
        } else {
            self.axes[0].len()
        }
    }

    pub fn point_into(&self, node: usize, out: &mut [f64; MAX_DIM]) {
        let idx = self.multi_index(node);
        for (d, ax) in self.axes.iter().enumerate() {
            out[d] = ax.nodes()[idx[d]];
        }
    }

    pub fn point(&self, node: usize) -> [f64; MAX_DIM] {
        let mut p = [0.0; MAX_DIM];
        self.point_into(node, &mut p);
        p
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .enumerate()
            .all(|(d, ax)| x[d] >= ax.min() && x[d] <= ax.max())
    }

    /// Index `k` and fraction for time `t` (clamped to the window).
    pub fn locate_time(&self, t: f64) -> (usize, f64) {
        let n = self.t_nodes.len();
        let k = match self.t_uniform {
            Some(dt) => {
                if t <= 0.0 {
                    return (0, 0.0);
                }
                ((t / dt) as usize).min(n - 2)
            }
            None => {
                if t <= self.t_nodes[0] {
                    return (0, 0.0);
                }
                self.t_nodes.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2)
            }
        };
        let (a, b) = (self.t_nodes[k], self.t_nodes[k + 1]);
        (k, ((t - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// Index of the time node nearest to `t`.
    pub fn nearest_time(&self, t: f64) -> usize {
        let (k, th) = self.locate_time(t);
        if th < 0.5 {
            k
        } else {
            k + 1
        }
    }
}

/// Values of a function of `(t, x)` on every node of a grid, stored slice by
/// slice in time.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    n_time: usize,
    n_space: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &SpaceTimeGrid, c: f64) -> Self {
        Self {
            n_time: grid.n_time(),
            n_space: grid.n_space(),
            values: vec![c; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_nodes());
        let mut x = [0.0; MAX_DIM];
        for &t in grid.t_nodes() {
            for node in 0..grid.n_space() {
                grid.point_into(node, &mut x);
                values.push(f(t, &x[..grid.dim()]));
            }
        }
        Self {
            n_time: grid.n_time(),
            n_space: grid.n_space(),
            values,
        }
    }

    pub fn from_values(grid: &SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Shape {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("field values must be finite".into()));
        }
        Ok(Self {
            n_time: grid.n_time(),
            n_space: grid.n_space(),
            values,
        })
    }

    pub fn check_shape(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if self.n_time != grid.n_time() || self.n_space != grid.n_space() {
            return Err(Error::Shape {
                expected: grid.n_nodes(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_space..(k + 1) * self.n_space]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.n_space..(k + 1) * self.n_space]
    }

    pub fn get(&self, k: usize, node: usize) -> f64 {
        self.values[k * self.n_space + node]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_time: self.n_time,
            n_space: self.n_space,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "field shapes differ");
        Self {
            n_time: self.n_time,
            n_space: self.n_space,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "field shapes differ");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `min(self − other)` over all nodes.
    pub fn min_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(f64::INFINITY, |m, (a, b)| m.min(a - b))
    }

    /// Multilinear interpolation in `(t, x)`, clamped to the grid.
    pub fn interpolate(&self, grid: &SpaceTimeGrid, t: f64, x: &[f64]) -> f64 {
        let (k, th) = grid.locate_time(t);
        let a = self.interpolate_slice(grid, k, x);
        if th == 0.0 {
            return a;
        }
        let b = self.interpolate_slice(grid, k + 1, x);
        (1.0 - th) * a + th * b
    }

    pub fn interpolate_slice(&self, grid: &SpaceTimeGrid, k: usize, x: &[f64]) -> f64 {
        let s = self.slice(k);
        let axes = grid.axes();
        let (i, p) = axes[0].locate(x[0]);
        if axes.len() == 1 {
            return (1.0 - p) * s[i] + p * s[i + 1];
        }
        let (j, q) = axes[1].locate(x[1]);
        let n0 = axes[0].len();
        let r0 = (1.0 - p) * s[i + n0 * j] + p * s[i + 1 + n0 * j];
        let r1 = (1.0 - p) * s[i + n0 * (j + 1)] + p * s[i + 1 + n0 * (j + 1)];
        (1.0 - q) * r0 + q * r1
    }

    /// Writes `t, x1[, x2], value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, grid: &SpaceTimeGrid, mut w: W) -> std::io::Result<()> {
        let header = match grid.dim() {
            1 => "t,x1,value",
            _ => "t,x1,x2,value",
        };
        writeln!(w, "{header}")?;
        let mut x = [0.0; MAX_DIM];
        for (k, &t) in grid.t_nodes().iter().enumerate() {
            for node in 0..grid.n_space() {
                grid.point_into(node, &mut x);
                write!(w, "{t:.16e}")?;
                for xd in &x[..grid.dim()] {
                    write!(w, ",{xd:.16e}")?;
                }
                writeln!(w, ",{:.16e}", self.get(k, node))?;
            }
        }
        Ok(())
    }
}

/// Boolean field over the grid, e.g. a contact set or stopping region.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    n_time: usize,
    n_space: usize,
    values: Vec<bool>,
}

impl Mask {
    pub fn from_fn(field: &ScalarField, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(field.values.len());
        for k in 0..field.n_time {
            for node in 0..field.n_space {
                values.push(f(k, node));
            }
        }
        Self {
            n_time: field.n_time,
            n_space: field.n_space,
            values,
        }
    }

    pub fn full(grid: &SpaceTimeGrid, value: bool) -> Self {
        Self {
            n_time: grid.n_time(),
            n_space: grid.n_space(),
            values: vec![value; grid.n_nodes()],
        }
    }

    pub fn get(&self, k: usize, node: usize) -> bool {
        self.values[k * self.n_space + node]
    }

    pub fn set(&mut self, k: usize, node: usize, v: bool) {
        self.values[k * self.n_space + node] = v;
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    pub fn slice(&self, k: usize) -> &[bool] {
        &self.values[k * self.n_space..(k + 1) * self.n_space]
    }

    pub fn and(&self, other: &Self) -> Self {
        Self {
            n_time: self.n_time,
            n_space: self.n_space,
            values: self.values.iter().zip(&other.values).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn or(&self, other: &Self) -> Self {
        Self {
            n_time: self.n_time,
            n_space: self.n_space,
            values: self.values.iter().zip(&other.values).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            n_time: self.n_time,
            n_space: self.n_space,
            values: self.values.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, grid: &SpaceTimeGrid, w: W) -> std::io::Result<()> {
        self.to_field().write_csv(grid, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_mask_is_outer_layer() {
        let g = SpaceTimeGrid::uniform(
            1.0,
            2,
            vec![Axis::uniform(0.0, 1.0, 4).unwrap(), Axis::uniform(0.0, 1.0, 5).unwrap()],
        )
        .unwrap();
        let interior = (0..g.n_space()).filter(|&n| !g.is_boundary(n)).count();
        assert_eq!(interior, 2 * 3);
        assert!(g.is_boundary(g.node_index([0, 2])));
        assert!(g.is_boundary(g.node_index([3, 2])));
        assert!(!g.is_boundary(g.node_index([1, 1])));
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(Axis::uniform(1.0, 0.0, 5).is_err());
        assert!(Axis::from_nodes(vec![0.0, 0.5, 0.5]).is_err());
        assert!(SpaceTimeGrid::new(vec![0.0, 1.0, 0.5], vec![Axis::uniform(0.0, 1.0, 3).unwrap()]).is_err());
    }

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let g = SpaceTimeGrid::uniform(
            2.0,
            4,
            vec![Axis::uniform(-1.0, 1.0, 5).unwrap(), Axis::from_nodes(vec![0.0, 0.3, 1.0, 1.2]).unwrap()],
        )
        .unwrap();
        let f = |t: f64, x: &[f64]| 1.0 + 2.0 * t - x[0] + 0.5 * x[1] + 0.25 * x[0] * x[1];
        let field = ScalarField::from_fn(&g, f);
        for (t, x0, x1) in [(0.3, 0.1, 0.2), (1.9, -0.95, 1.1), (1.0, 0.5, 0.3)] {
            let v = field.interpolate(&g, t, &[x0, x1]);
            assert!((v - f(t, &[x0, x1])).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_uses_fixed_columns() {
        let g = SpaceTimeGrid::uniform(1.0, 1, vec![Axis::uniform(0.0, 1.0, 3).unwrap()]).unwrap();
        let f = ScalarField::from_fn(&g, |t, x| t + x[0]);
        let mut buf = Vec::new();
        f.write_csv(&g, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "t,x1,value");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[2], "0.0000000000000000e0,5.0000000000000000e-1,5.0000000000000000e-1");
    }
}
