//! Discrete time-dependent Dirichlet forms.
//!
//! Each time slice gets a lumped mass `M` (the measure `ρ dx` integrated over
//! dual cells) and a stiffness `K` with `uᵀKv ≈ ∫∇u·A∇v ρ dx`, built from a
//! conservative two-point flux per grid edge. In `unit` density mode the
//! divergence-corrected drift is added as a separate first-order upwind
//! operator `D`. Both `K` and `D` have nonpositive off-diagonals, so every
//! step matrix is an M-matrix.
//!
//! Time stepping is implicit in `u_k`. The discount over a step is applied
//! exactly: the zero-order coefficient is `α̂ = (e^{αΔt} − 1)/Δt` and sources
//! are scaled by `(e^{αΔt} − 1)/(αΔt)`, so spatially constant data reproduce
//! `∫ e^{−αs} f ds` without time-discretization error.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{ScalarField, SpaceTimeGrid};
use crate::linalg::{BandedLu, SparseMatrix};
use crate::model::{build_density, DiffusionModel, SymmetrizingDensity, MAX_DIM};

// 5-point Gauss–Legendre on [-1, 1]
const GAUSS_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_W: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn gauss(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS_X
        .iter()
        .zip(GAUSS_W)
        .map(|(&x, w)| w * f(c + r * x))
        .sum::<f64>()
        * r
}

/// Discrete spatial operators of one time slice.
#[derive(Clone, Debug)]
pub struct SliceOperator {
    pub time_index: usize,
    pub time: f64,
    stiffness: SparseMatrix,
    mass: Vec<f64>,
    drift: Option<SparseMatrix>,
}

impl SliceOperator {
    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Upwind drift operator, present only in `unit` density mode.
    pub fn drift(&self) -> Option<&SparseMatrix> {
        self.drift.as_ref()
    }

    /// `uᵀKv + Σ m_i u_i v_i · alpha`.
    pub fn energy(&self, u: &[f64], v: &[f64], alpha: f64) -> f64 {
        let mass: f64 = self.mass.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum();
        self.stiffness.bilinear(u, v) + alpha * mass
    }

    /// `vᵀ(K + D)u`: the generator form including any upwind drift.
    fn generator_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = self.stiffness.bilinear(v, u);
        if let Some(d) = &self.drift {
            s += d.bilinear(v, u);
        }
        s
    }
}

/// Assembles the mass and stiffness operators at time node `t_index`.
pub fn assemble_slice(
    model: &DiffusionModel,
    density: &SymmetrizingDensity,
    grid: &SpaceTimeGrid,
    t_index: usize,
) -> Result<SliceOperator> {
    let t = grid.t_nodes()[t_index];
    let dim = grid.dim();
    let n = grid.n_space();
    let axes = grid.axes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2 * dim + 1); n];
    let mut mass = vec![0.0; n];
    let mut x = [0.0; MAX_DIM];

    for p in 0..n {
        grid.point_into(p, &mut x);
        let idx = grid.multi_index(p);

        if dim == 2 {
            let a = model.covariance(t, &x);
            let scale = a[0][0].abs() + a[1][1].abs();
            if a[0][1].abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::Assembly(
                    "cross-diffusion (off-diagonal A) is not supported by the monotone 5-point stencil"
                        .into(),
                ));
            }
        }

        // lumped mass: ∫ρ over the dual cell
        mass[p] = match dim {
            1 => {
                let (lo, hi) = axes[0].dual_interval(idx[0]);
                gauss(lo, hi, |s| density.value(t, &[s]))
            }
            _ => {
                let (lo0, hi0) = axes[0].dual_interval(idx[0]);
                let (lo1, hi1) = axes[1].dual_interval(idx[1]);
                gauss(lo1, hi1, |s1| gauss(lo0, hi0, |s0| density.value(t, &[s0, s1])))
            }
        };

        // one flux per edge towards the + neighbour on each axis
        for d in 0..dim {
            if idx[d] + 1 >= axes[d].len() {
                continue;
            }
            let q = p + grid.stride(d);
            let (xa, xb) = (axes[d].nodes()[idx[d]], axes[d].nodes()[idx[d] + 1]);
            let h = xb - xa;
            let cross = if dim == 1 {
                1.0
            } else {
                let o = 1 - d;
                let (lo, hi) = axes[o].dual_interval(idx[o]);
                hi - lo
            };
            let integral = gauss(xa, xb, |s| {
                let mut y = x;
                y[d] = s;
                model.covariance(t, &y)[d][d] * density.value(t, &y)
            });
            let c = integral * cross / (h * h);
            rows[p].push((p, c));
            rows[p].push((q, -c));
            rows[q].push((q, c));
            rows[q].push((p, -c));
        }
        rows[p].push((p, 0.0));
    }
    let stiffness = SparseMatrix::from_rows(rows);

    let drift = if model.density_mode().is_symmetric() {
        None
    } else {
        Some(upwind_drift(model, grid, t, &mass))
    };

    let op = SliceOperator {
        time_index: t_index,
        time: t,
        stiffness,
        mass,
        drift,
    };
    if op.stiffness.max_asymmetry() > 1e-12 {
        return Err(Error::Assembly("stiffness is not symmetric".into()));
    }
    if op.mass.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::Assembly("mass must be positive and finite".into()));
    }
    Ok(op)
}

/// First-order upwind discretization of `−μ·∇u`, weighted by the mass.
/// Nodes whose upwind neighbour lies outside the box get no drift term.
fn upwind_drift(model: &DiffusionModel, grid: &SpaceTimeGrid, t: f64, mass: &[f64]) -> SparseMatrix {
    let n = grid.n_space();
    let axes = grid.axes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut x = [0.0; MAX_DIM];
    for (p, row) in rows.iter_mut().enumerate() {
        grid.point_into(p, &mut x);
        let idx = grid.multi_index(p);
        let mu = model.corrected_drift(t, &x);
        row.push((p, 0.0));
        for d in 0..grid.dim() {
            let m = mu[d];
            let nodes = axes[d].nodes();
            if m > 0.0 && idx[d] + 1 < nodes.len() {
                let c = mass[p] * m / (nodes[idx[d] + 1] - nodes[idx[d]]);
                row.push((p, c));
                row.push((p + grid.stride(d), -c));
            } else if m < 0.0 && idx[d] > 0 {
                let c = -mass[p] * m / (nodes[idx[d]] - nodes[idx[d] - 1]);
                row.push((p, c));
                row.push((p - grid.stride(d), -c));
            }
        }
    }
    SparseMatrix::from_rows(rows)
}

/// `E_α(u, v) = uᵀKv + α·uᵀMv` on one slice.
pub fn bilinear_alpha(op: &SliceOperator, u: &[f64], v: &[f64], alpha: f64) -> Result<f64> {
    let n = op.mass.len();
    for len in [u.len(), v.len()] {
        if len != n {
            return Err(Error::Shape {
                expected: n,
                got: len,
            });
        }
    }
    Ok(op.energy(u, v, alpha))
}

/// Which argument of the space-time form carries the time derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeDerivativeSide {
    /// `−⟨∂u/∂t, v⟩ + 𝒜_α(u, v)`
    First,
    /// `⟨∂v/∂t, u⟩ + 𝒜_α(u, v)`
    Second,
}

/// How spatial boundary nodes are treated by a time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero-flux: the form on the box as assembled (the process is not killed).
    Natural,
    /// Values prescribed on the outer layer of nodes.
    Dirichlet,
}

/// A model, grid and density together with every assembled slice.
#[derive(Clone, Debug)]
pub struct Discretization {
    model: DiffusionModel,
    grid: SpaceTimeGrid,
    density: SymmetrizingDensity,
    slices: Vec<SliceOperator>,
}

impl Discretization {
    pub fn new(model: DiffusionModel, grid: SpaceTimeGrid) -> Result<Self> {
        Self::with_execution(model, grid, Execution::default())
    }

    pub fn with_execution(model: DiffusionModel, grid: SpaceTimeGrid, exec: Execution) -> Result<Self> {
        model.check_nondegenerate(&grid)?;
        let density = build_density(&model, &grid)?;
        let slices = exec
            .map_indexed(grid.n_time(), |k| assemble_slice(&model, &density, &grid, k))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            grid,
            density,
            slices,
        })
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn density(&self) -> &SymmetrizingDensity {
        &self.density
    }

    pub fn alpha(&self) -> f64 {
        self.model.alpha()
    }

    pub fn slice(&self, k: usize) -> &SliceOperator {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[SliceOperator] {
        &self.slices
    }

    /// Number of backward steps (`n_time − 1`).
    pub fn n_steps(&self) -> usize {
        self.grid.n_time() - 1
    }

    /// Zero-order coefficient `α̂_k = (e^{αΔt_k} − 1)/Δt_k` of step `k`.
    pub fn effective_rate(&self, k: usize) -> f64 {
        let dt = self.grid.dt(k);
        (self.alpha() * dt).exp_m1() / dt
    }

    /// Source weight `(e^{αΔt_k} − 1)/(αΔt_k)` of step `k`.
    pub fn source_scale(&self, k: usize) -> f64 {
        let z = self.alpha() * self.grid.dt(k);
        z.exp_m1() / z
    }

    /// Matrix of the step from `t_{k+1}` to `t_k`:
    /// `M_k/Δt + K_k + D_k + α̂_k M_k`, with identity rows on the boundary
    /// for [`Boundary::Dirichlet`].
    pub fn step_matrix(&self, k: usize, boundary: Boundary) -> SparseMatrix {
        let op = &self.slices[k];
        let c = 1.0 / self.grid.dt(k) + self.effective_rate(k);
        let shift: Vec<f64> = op.mass.iter().map(|m| c * m).collect();
        let mut a = op.stiffness.plus_diag(&shift);
        if let Some(d) = &op.drift {
            a = a.combine(1.0, d, 1.0);
        }
        match boundary {
            Boundary::Natural => a,
            Boundary::Dirichlet => a.with_identity_rows(self.grid.boundary_mask()),
        }
    }

    /// Right-hand side `M_k u_{k+1}/Δt + s_k M_k f_k` of step `k`.
    pub fn step_rhs(&self, k: usize, next: &[f64], source: Option<&[f64]>, out: &mut [f64]) {
        let op = &self.slices[k];
        let inv_dt = 1.0 / self.grid.dt(k);
        let s = self.source_scale(k);
        for i in 0..out.len() {
            out[i] = op.mass[i] * next[i] * inv_dt;
            if let Some(f) = source {
                out[i] += s * op.mass[i] * f[i];
            }
        }
    }

    /// Discrete `ℰ(u, v) − (f, v)_ℋ` exactly as the time-stepping scheme
    /// defines it (effective rates, drift included), summed over steps
    /// `k < N`. For the scheme's own solution `u` this is
    /// `Σ_k Δt_k (residual_k · v_k)`.
    pub fn scheme_form(&self, u: &ScalarField, v: &ScalarField, source: Option<&ScalarField>) -> f64 {
        let mut total = 0.0;
        for k in 0..self.n_steps() {
            let dt = self.grid.dt(k);
            let op = &self.slices[k];
            let (uk, un, vk) = (u.slice(k), u.slice(k + 1), v.slice(k));
            let rate = self.effective_rate(k);
            let mut s = op.generator_form(uk, vk);
            for i in 0..vk.len() {
                s += op.mass[i] * vk[i] * ((uk[i] - un[i]) / dt + rate * uk[i]);
                if let Some(f) = source {
                    s -= self.source_scale(k) * op.mass[i] * f.slice(k)[i] * vk[i];
                }
            }
            total += dt * s;
        }
        total
    }
}

/// Discrete `𝒜_α(u, v) = Σ_{k<N} Δt_k E_α^{(t_k)}(u_k, v_k)`.
pub fn alpha_form(disc: &Discretization, u: &ScalarField, v: &ScalarField, alpha: f64) -> Result<f64> {
    u.check_shape(disc.grid())?;
    v.check_shape(disc.grid())?;
    let mut total = 0.0;
    for k in 0..disc.n_steps() {
        total += disc.grid().dt(k) * disc.slice(k).energy(u.slice(k), v.slice(k), alpha);
    }
    Ok(total)
}

/// Discrete space-time form `ℰ_α(u, v)`.
///
/// The time derivative at slice `k` is `(u_{k+1} − u_k)/Δt_k`, the difference
/// the implicit backward march uses. For [`TimeDerivativeSide::Second`] the
/// pairing is `Σ (v_{k+1} − v_k)ᵀ M_k u_{k+1}`, which makes the two sides
/// differ only by time-boundary terms.
pub fn spacetime_form(
    disc: &Discretization,
    u: &ScalarField,
    v: &ScalarField,
    alpha: f64,
    side: TimeDerivativeSide,
) -> Result<f64> {
    if disc.grid().n_time() < 2 {
        return Err(Error::Grid("space-time form needs at least two time slices".into()));
    }
    let mut total = alpha_form(disc, u, v, alpha)?;
    for k in 0..disc.n_steps() {
        let m = disc.slice(k).mass();
        let t: f64 = match side {
            TimeDerivativeSide::First => {
                let (a, b, w) = (u.slice(k), u.slice(k + 1), v.slice(k));
                -(0..m.len()).map(|i| m[i] * (b[i] - a[i]) * w[i]).sum::<f64>()
            }
            TimeDerivativeSide::Second => {
                let (a, b, w) = (v.slice(k), v.slice(k + 1), u.slice(k + 1));
                (0..m.len()).map(|i| m[i] * (b[i] - a[i]) * w[i]).sum::<f64>()
            }
        };
        total += t;
    }
    Ok(total)
}

/// `(u, v)_ν = Σ_{k<N} Δt_k Σ_i m_i u_i v_i`.
pub fn space_time_inner(disc: &Discretization, u: &ScalarField, v: &ScalarField) -> f64 {
    (0..disc.n_steps())
        .map(|k| {
            let m = disc.slice(k).mass();
            let (a, b) = (u.slice(k), v.slice(k));
            disc.grid().dt(k) * (0..m.len()).map(|i| m[i] * a[i] * b[i]).sum::<f64>()
        })
        .sum()
}

/// Resolvent `R_α f`: solves `(α − ∂_t − L) u = f` backward from `u(T) = 0`
/// with zero-flux spatial boundaries.
pub fn resolvent_apply(disc: &Discretization, f: &ScalarField) -> Result<ScalarField> {
    f.check_shape(disc.grid())?;
    if !f.is_finite() {
        return Err(Error::Problem("resolvent source has non-finite values".into()));
    }
    let grid = disc.grid();
    let mut u = ScalarField::zeros(grid);
    let n = grid.n_space();
    let mut rhs = vec![0.0; n];
    for k in (0..disc.n_steps()).rev() {
        let a = disc.step_matrix(k, Boundary::Natural);
        let lu = BandedLu::factor(&a, None)
            .ok_or_else(|| Error::Scheme(format!("singular resolvent system at slice {k}")))?;
        disc.step_rhs(k, u.slice(k + 1), Some(f.slice(k)), &mut rhs);
        lu.solve_in_place(&mut rhs);
        u.slice_mut(k).copy_from_slice(&rhs);
    }
    Ok(u)
}
