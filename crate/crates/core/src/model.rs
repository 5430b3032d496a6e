//! Time-inhomogeneous Itô diffusions `dX = b(t,X) dt + a(t,X) dB` and the
//! quantities the Dirichlet form needs from them: the covariance
//! `A = ½ a aᵀ`, the corrected drift `μ_i = b_i − Σ_j ∂A_ji/∂x_j` and a
//! symmetrizing density `ρ` with `A∇ρ = ρ μ`.
//!
//! Coefficients come from a small set of named families so that every model
//! is deterministic, serializable and has analytic derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;

/// Largest state dimension the discretization supports.
pub const MAX_DIM: usize = 2;

pub type Vector = [f64; MAX_DIM];
pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];

pub const DEFAULT_LAMBDA_MIN: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Constant {
        b: Vec<f64>,
    },
    /// `b_i(t, x) = offset_i + slope_i x_i + time_slope_i t`
    Affine {
        offset: Vec<f64>,
        slope: Vec<f64>,
        #[serde(default)]
        time_slope: Vec<f64>,
    },
    /// `b_i(t, x) = rate_i x_i`
    Gbm {
        rate: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    /// Constant `n × m` matrix, rows indexed by state coordinate.
    Constant { a: Vec<Vec<f64>> },
    /// `a(t) = a · (1 + time_slope · t)`.
    TimeScaled { a: Vec<Vec<f64>>, time_slope: f64 },
    /// `a = diag(vol_i x_i)`.
    Gbm { vol: Vec<f64> },
}

/// Parametric symmetrizing densities a user may supply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `ρ(x) = Π x_i^{p_i}`, requires a positive domain.
    Power { exponents: Vec<f64> },
    /// `ρ(x) = exp(c · x)`.
    Exponential { coefficients: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// `ρ(x) = exp((A⁻¹ b) · x)`, valid for spatially constant coefficients.
    ClosedForm,
    UserSupplied(DensitySpec),
    /// `ρ ≡ 1`; drift is then discretized separately by upwinding.
    Unit,
}

impl DensityMode {
    /// Whether the spatial operator is built from a symmetric form alone.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self, DensityMode::Unit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionModel {
    dim: usize,
    noise_dim: usize,
    drift: DriftSpec,
    diffusion: DiffusionSpec,
    alpha: f64,
    density_mode: DensityMode,
    lambda_min: f64,
}

impl DiffusionModel {
    pub fn new(
        dim: usize,
        drift: DriftSpec,
        diffusion: DiffusionSpec,
        alpha: f64,
        density_mode: DensityMode,
    ) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Model(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Model(format!("discount alpha must be positive, got {alpha}")));
        }
        let check_len = |name: &str, v: &[f64]| -> Result<()> {
            if v.len() != dim {
                return Err(Error::Model(format!(
                    "{name} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Model(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        match &drift {
            DriftSpec::Constant { b } => check_len("drift.b", b)?,
            DriftSpec::Affine {
                offset,
                slope,
                time_slope,
            } => {
                check_len("drift.offset", offset)?;
                check_len("drift.slope", slope)?;
                if !time_slope.is_empty() {
                    check_len("drift.time_slope", time_slope)?;
                }
            }
            DriftSpec::Gbm { rate } => check_len("drift.rate", rate)?,
        }
        let noise_dim = match &diffusion {
            DiffusionSpec::Constant { a } | DiffusionSpec::TimeScaled { a, .. } => {
                if a.len() != dim {
                    return Err(Error::Model(format!(
                        "diffusion.a has {} rows, expected {dim}",
                        a.len()
                    )));
                }
                let m = a[0].len();
                if m < dim || a.iter().any(|row| row.len() != m) {
                    return Err(Error::Model(
                        "diffusion.a must be a rectangular n x m matrix with m >= n".into(),
                    ));
                }
                if a.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::Model("diffusion.a has non-finite entries".into()));
                }
                m
            }
            DiffusionSpec::Gbm { vol } => {
                check_len("diffusion.vol", vol)?;
                dim
            }
        };
        if let DensityMode::UserSupplied(spec) = &density_mode {
            let v = match spec {
                DensitySpec::Power { exponents } => exponents,
                DensitySpec::Exponential { coefficients } => coefficients,
            };
            check_len("density parameters", v)?;
        }
        Ok(Self {
            dim,
            noise_dim,
            drift,
            diffusion,
            alpha,
            density_mode,
            lambda_min: DEFAULT_LAMBDA_MIN,
        })
    }

    pub fn with_lambda_min(mut self, lambda_min: f64) -> Self {
        self.lambda_min = lambda_min;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of driving Brownian motions `m`.
    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn density_mode(&self) -> &DensityMode {
        &self.density_mode
    }

    pub fn drift_spec(&self) -> &DriftSpec {
        &self.drift
    }

    pub fn diffusion_spec(&self) -> &DiffusionSpec {
        &self.diffusion
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// True when `a` and `b` do not depend on `x` (they may depend on `t`).
    pub fn is_spatially_constant(&self) -> bool {
        let drift_const = match &self.drift {
            DriftSpec::Constant { .. } => true,
            DriftSpec::Affine { slope, .. } => slope.iter().all(|&s| s == 0.0),
            DriftSpec::Gbm { rate } => rate.iter().all(|&r| r == 0.0),
        };
        let diff_const = !matches!(self.diffusion, DiffusionSpec::Gbm { .. });
        drift_const && diff_const
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Vector {
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = match &self.drift {
                DriftSpec::Constant { b } => b[i],
                DriftSpec::Affine {
                    offset,
                    slope,
                    time_slope,
                } => offset[i] + slope[i] * x[i] + time_slope.get(i).copied().unwrap_or(0.0) * t,
                DriftSpec::Gbm { rate } => rate[i] * x[i],
            };
        }
        out
    }

    /// `a(t, x) · dw` for a noise increment of length `noise_dim`.
    pub fn diffuse(&self, t: f64, x: &[f64], dw: &[f64]) -> Vector {
        let mut out = [0.0; MAX_DIM];
        match &self.diffusion {
            DiffusionSpec::Constant { a } => {
                for i in 0..self.dim {
                    out[i] = a[i].iter().zip(dw).map(|(aij, w)| aij * w).sum();
                }
            }
            DiffusionSpec::TimeScaled { a, time_slope } => {
                let s = 1.0 + time_slope * t;
                for i in 0..self.dim {
                    out[i] = s * a[i].iter().zip(dw).map(|(aij, w)| aij * w).sum::<f64>();
                }
            }
            DiffusionSpec::Gbm { vol } => {
                for i in 0..self.dim {
                    out[i] = vol[i] * x[i] * dw[i];
                }
            }
        }
        out
    }

    /// Covariance `A = ½ a aᵀ` (zero outside the leading `dim × dim` block).
    pub fn covariance(&self, t: f64, x: &[f64]) -> Matrix {
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        match &self.diffusion {
            DiffusionSpec::Constant { a } | DiffusionSpec::TimeScaled { a, .. } => {
                let s = match &self.diffusion {
                    DiffusionSpec::TimeScaled { time_slope, .. } => 1.0 + time_slope * t,
                    _ => 1.0,
                };
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        let dot: f64 = a[i].iter().zip(&a[j]).map(|(p, q)| p * q).sum();
                        out[i][j] = 0.5 * s * s * dot;
                    }
                }
            }
            DiffusionSpec::Gbm { vol } => {
                for i in 0..self.dim {
                    out[i][i] = 0.5 * vol[i] * vol[i] * x[i] * x[i];
                }
            }
        }
        out
    }

    /// Divergence-corrected drift `μ_i = b_i − Σ_j ∂A_ji/∂x_j`.
    pub fn corrected_drift(&self, t: f64, x: &[f64]) -> Vector {
        let mut mu = self.drift(t, x);
        if let DiffusionSpec::Gbm { vol } = &self.diffusion {
            for i in 0..self.dim {
                mu[i] -= vol[i] * vol[i] * x[i];
            }
        }
        mu
    }

    /// Smallest eigenvalue of `A(t, x)`.
    pub fn min_eigenvalue(&self, t: f64, x: &[f64]) -> f64 {
        let a = self.covariance(t, x);
        min_eigenvalue(&a, self.dim)
    }

    /// Rejects the model if `A` is not symmetric positive definite with
    /// eigenvalues at least `lambda_min` at every grid node.
    pub fn check_nondegenerate(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::Model(format!(
                "grid dimension {} does not match model dimension {}",
                grid.dim(),
                self.dim
            )));
        }
        let mut x = [0.0; MAX_DIM];
        for &t in grid.t_nodes() {
            for node in 0..grid.n_space() {
                grid.point_into(node, &mut x);
                let a = self.covariance(t, &x);
                if self.dim == 2 && (a[0][1] - a[1][0]).abs() > 1e-12 {
                    return Err(Error::Model("covariance is not symmetric".into()));
                }
                let lam = min_eigenvalue(&a, self.dim);
                if !(lam >= self.lambda_min) {
                    return Err(Error::Model(format!(
                        "covariance is degenerate at t = {t}, x = {:?}: smallest eigenvalue {lam:e} < {:e}",
                        &x[..self.dim],
                        self.lambda_min
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn min_eigenvalue(a: &Matrix, dim: usize) -> f64 {
    if dim == 1 {
        return a[0][0];
    }
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    0.5 * tr - disc
}

fn solve_sym(a: &Matrix, b: &Vector, dim: usize) -> Vector {
    if dim == 1 {
        return [b[0] / a[0][0], 0.0];
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        (a[1][1] * b[0] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityProvenance {
    ClosedForm,
    UserSupplied,
    Unit,
}

#[derive(Clone, Debug)]
enum DensityKind {
    Unit,
    ClosedForm(DiffusionModel),
    Power(Vec<f64>),
    Exponential(Vec<f64>),
}

/// Positive weight `ρ^{(t)}` making the spatial generator symmetric in
/// `L²(ρ dx)`.
#[derive(Clone, Debug)]
pub struct SymmetrizingDensity {
    kind: DensityKind,
    dim: usize,
}

impl SymmetrizingDensity {
    pub fn unit(dim: usize) -> Self {
        Self {
            kind: DensityKind::Unit,
            dim,
        }
    }

    pub fn provenance(&self) -> DensityProvenance {
        match self.kind {
            DensityKind::Unit => DensityProvenance::Unit,
            DensityKind::ClosedForm(_) => DensityProvenance::ClosedForm,
            DensityKind::Power(_) | DensityKind::Exponential(_) => DensityProvenance::UserSupplied,
        }
    }

    /// Exponent `A(t)⁻¹ b(t)` of the closed-form density.
    pub fn closed_form_exponent(model: &DiffusionModel, t: f64) -> Vector {
        let origin = [0.0; MAX_DIM];
        let a = model.covariance(t, &origin);
        let b = model.drift(t, &origin);
        solve_sym(&a, &b, model.dim())
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Unit => 1.0,
            DensityKind::ClosedForm(model) => {
                let c = Self::closed_form_exponent(model, t);
                let s: f64 = (0..self.dim).map(|i| c[i] * x[i]).sum();
                s.exp()
            }
            DensityKind::Power(p) => (0..self.dim).map(|i| x[i].powf(p[i])).product(),
            DensityKind::Exponential(c) => {
                let s: f64 = (0..self.dim).map(|i| c[i] * x[i]).sum();
                s.exp()
            }
        }
    }
}

/// Builds the density selected by the model's `density_mode` and checks that
/// it is positive at every grid node.
pub fn build_density(model: &DiffusionModel, grid: &SpaceTimeGrid) -> Result<SymmetrizingDensity> {
    let kind = match model.density_mode() {
        DensityMode::Unit => DensityKind::Unit,
        DensityMode::ClosedForm => {
            if !model.is_spatially_constant() {
                return Err(Error::ModeMismatch(
                    "closed-form density requires coefficients that do not depend on x".into(),
                ));
            }
            DensityKind::ClosedForm(model.clone())
        }
        DensityMode::UserSupplied(DensitySpec::Power { exponents }) => {
            DensityKind::Power(exponents.clone())
        }
        DensityMode::UserSupplied(DensitySpec::Exponential { coefficients }) => {
            DensityKind::Exponential(coefficients.clone())
        }
    };
    let density = SymmetrizingDensity {
        kind,
        dim: model.dim(),
    };
    let mut x = [0.0; MAX_DIM];
    for &t in grid.t_nodes() {
        for node in 0..grid.n_space() {
            grid.point_into(node, &mut x);
            let r = density.value(t, &x);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidDensity(format!(
                    "density is {r} at t = {t}, x = {:?}",
                    &x[..model.dim()]
                )));
            }
        }
    }
    Ok(density)
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftResidualReport {
    /// `max |A∇ρ − ρμ|` over grid nodes and components.
    pub max_residual: f64,
    /// Same residual divided by `ρ`, i.e. `max |A∇log ρ − μ|`.
    pub max_log_residual: f64,
    pub worst_t: f64,
    pub worst_x: Vec<f64>,
}

impl DriftResidualReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_log_residual <= tol
    }
}

/// Measures how well `density` satisfies `A∇ρ = ρμ`, with `∇ρ` taken by
/// central differences of relative width `rel_step`.
pub fn drift_consistency_check(
    model: &DiffusionModel,
    density: &SymmetrizingDensity,
    grid: &SpaceTimeGrid,
    rel_step: f64,
) -> DriftResidualReport {
    let dim = model.dim();
    let mut report = DriftResidualReport {
        max_residual: 0.0,
        max_log_residual: 0.0,
        worst_t: grid.t_nodes()[0],
        worst_x: vec![0.0; dim],
    };
    let mut x = [0.0; MAX_DIM];
    for &t in grid.t_nodes() {
        for node in 0..grid.n_space() {
            grid.point_into(node, &mut x);
            let rho = density.value(t, &x);
            let mut grad = [0.0; MAX_DIM];
            for k in 0..dim {
                let h = rel_step * (1.0 + x[k].abs());
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                grad[k] = (density.value(t, &xp) - density.value(t, &xm)) / (2.0 * h);
            }
            let a = model.covariance(t, &x);
            let mu = model.corrected_drift(t, &x);
            for i in 0..dim {
                let lhs: f64 = (0..dim).map(|j| a[i][j] * grad[j]).sum();
                let r = (lhs - rho * mu[i]).abs();
                if r > report.max_residual {
                    report.max_residual = r;
                }
                if r / rho > report.max_log_residual {
                    report.max_log_residual = r / rho;
                    report.worst_t = t;
                    report.worst_x = x[..dim].to_vec();
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, SpaceTimeGrid};

    fn grid_1d(lo: f64, hi: f64, n: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::uniform(1.0, 4, vec![Axis::uniform(lo, hi, n).unwrap()]).unwrap()
    }

    fn bm_1d(b: f64) -> DiffusionModel {
        DiffusionModel::new(
            1,
            DriftSpec::Constant { b: vec![b] },
            DiffusionSpec::Constant {
                a: vec![vec![2f64.sqrt()]],
            },
            0.1,
            DensityMode::ClosedForm,
        )
        .unwrap()
    }

    #[test]
    fn closed_form_density_without_drift_is_one() {
        let g = grid_1d(-1.0, 1.0, 11);
        let rho = build_density(&bm_1d(0.0), &g).unwrap();
        for x in [-1.0, 0.0, 0.3, 1.0] {
            assert_eq!(rho.value(0.0, &[x]), 1.0);
        }
    }

    #[test]
    fn closed_form_density_is_exponential() {
        let g = grid_1d(-1.0, 1.0, 11);
        let rho = build_density(&bm_1d(1.0), &g).unwrap();
        assert_eq!(rho.provenance(), DensityProvenance::ClosedForm);
        for x in [-1.0, -0.2, 0.0, 0.7, 1.0] {
            let r: f64 = rho.value(0.5, &[x]);
            assert!((r - f64::exp(x)).abs() <= 1e-14 * f64::exp(x));
        }
    }

    #[test]
    fn closed_form_density_2d() {
        let model = DiffusionModel::new(
            2,
            DriftSpec::Constant { b: vec![1.0, -2.0] },
            DiffusionSpec::Constant {
                a: vec![vec![2f64.sqrt(), 0.0], vec![0.0, 2f64.sqrt()]],
            },
            0.1,
            DensityMode::ClosedForm,
        )
        .unwrap();
        let g = SpaceTimeGrid::uniform(
            1.0,
            2,
            vec![
                Axis::uniform(-1.0, 1.0, 5).unwrap(),
                Axis::uniform(-1.0, 1.0, 5).unwrap(),
            ],
        )
        .unwrap();
        let rho = build_density(&model, &g).unwrap();
        for (x1, x2) in [(0.1, 0.2), (-0.7, 0.9), (1.0, -1.0)] {
            let expect = f64::exp(x1 - 2.0 * x2);
            assert!((rho.value(0.0, &[x1, x2]) - expect).abs() <= 1e-14 * expect);
        }
    }

    #[test]
    fn closed_form_rejects_state_dependent_coefficients() {
        let model = DiffusionModel::new(
            1,
            DriftSpec::Gbm { rate: vec![0.05] },
            DiffusionSpec::Gbm { vol: vec![0.2] },
            0.05,
            DensityMode::ClosedForm,
        )
        .unwrap();
        let err = build_density(&model, &grid_1d(0.5, 2.0, 5)).unwrap_err();
        assert!(matches!(err, Error::ModeMismatch(_)));
    }

    #[test]
    fn nonpositive_user_density_is_rejected() {
        let model = DiffusionModel::new(
            1,
            DriftSpec::Gbm { rate: vec![0.05] },
            DiffusionSpec::Gbm { vol: vec![0.2] },
            0.05,
            DensityMode::UserSupplied(DensitySpec::Power {
                exponents: vec![1.0],
            }),
        )
        .unwrap();
        // x = 0 gives ρ = 0
        let err = build_density(&model, &grid_1d(0.0, 2.0, 5)).unwrap_err();
        assert!(matches!(err, Error::InvalidDensity(_)));
    }

    #[test]
    fn drift_residual_of_closed_form_density_is_small() {
        let g = grid_1d(-1.0, 1.0, 41);
        let m = bm_1d(1.0);
        let rho = build_density(&m, &g).unwrap();
        let rep = drift_consistency_check(&m, &rho, &g, 1e-4);
        assert!(rep.max_residual <= 1e-6, "{rep:?}");
    }

    #[test]
    fn drift_residual_of_unit_density() {
        let g = grid_1d(-1.0, 1.0, 21);
        let m = bm_1d(0.0);
        let unit = SymmetrizingDensity::unit(1);
        assert_eq!(drift_consistency_check(&m, &unit, &g, 1e-4).max_residual, 0.0);

        let m = bm_1d(0.7);
        let rep = drift_consistency_check(&m, &unit, &g, 1e-4);
        assert!((rep.max_residual - 0.7).abs() < 1e-15);
        assert!(!rep.passes(1e-6));
    }

    #[test]
    fn gbm_power_density_symmetrizes() {
        // μ = (r − σ²) x and A = ½σ²x² give ρ = x^{2r/σ² − 2}.
        let (r, s) = (0.06, 0.2);
        let m = DiffusionModel::new(
            1,
            DriftSpec::Gbm { rate: vec![r] },
            DiffusionSpec::Gbm { vol: vec![s] },
            r,
            DensityMode::UserSupplied(DensitySpec::Power {
                exponents: vec![2.0 * r / (s * s) - 2.0],
            }),
        )
        .unwrap();
        let g = grid_1d(0.2, 3.0, 29);
        let rho = build_density(&m, &g).unwrap();
        let rep = drift_consistency_check(&m, &rho, &g, 1e-5);
        assert!(rep.passes(1e-8), "{rep:?}");
    }

    #[test]
    fn degenerate_covariance_is_rejected() {
        let m = DiffusionModel::new(
            1,
            DriftSpec::Constant { b: vec![0.0] },
            DiffusionSpec::TimeScaled {
                a: vec![vec![1.0]],
                time_slope: -1.0,
            },
            0.1,
            DensityMode::Unit,
        )
        .unwrap();
        // a(t = 1) = 0
        assert!(m.check_nondegenerate(&grid_1d(0.0, 1.0, 5)).is_err());
    }

    #[test]
    fn covariance_is_symmetric_for_full_noise() {
        let m = DiffusionModel::new(
            2,
            DriftSpec::Constant { b: vec![0.0, 0.0] },
            DiffusionSpec::Constant {
                a: vec![vec![0.3, 0.1, 0.2], vec![-0.4, 0.5, 0.05]],
            },
            0.1,
            DensityMode::Unit,
        )
        .unwrap();
        let a = m.covariance(0.0, &[0.0, 0.0]);
        assert!((a[0][1] - a[1][0]).abs() <= 1e-12);
        assert!(m.min_eigenvalue(0.0, &[0.0, 0.0]) > 0.0);
        assert_eq!(m.noise_dim(), 3);
    }
}
