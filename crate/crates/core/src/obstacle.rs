//! One-obstacle problems: the smallest discrete α-potential dominating an
//! obstacle `g`, obtained as the increasing limit of penalized solutions.
//!
//! Each penalized step solves the nodewise nonlinear system
//!
//! ```text
//! (M/Δt + K + α̂M) u − (1/ε) M (g − u)⁺ = rhs
//! ```
//!
//! by semismooth Newton on the active set `{u < g}`. Spatial boundary nodes
//! and the terminal slice carry prescribed data (`g⁺` for a plain stopping
//! problem), so the solution is nonnegative like every α-potential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{resolvent_apply, Boundary, Discretization};
use crate::grid::{Mask, ScalarField, SpaceTimeGrid};
use crate::linalg::{projected_sor, BandedLu, RelaxationConfig, SparseMatrix};

/// Slack allowed when asserting monotone increase along the ε schedule.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    pub eps_schedule: Vec<f64>,
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    /// Contact tolerance; `None` means `1e-6 · (1 + ‖g‖_∞)`.
    pub contact_tol: Option<f64>,
    /// Finish with the `ε → 0` limit of the discrete penalized system,
    /// found by active-set iteration from the last penalized solution.
    pub limit_step: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            eps_schedule: (1..=8).map(|p| 10f64.powi(-p)).collect(),
            inner_tol: 1e-10,
            max_inner_iters: 200,
            contact_tol: None,
            limit_step: true,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_schedule.is_empty() {
            return Err(Error::Problem("eps_schedule must not be empty".into()));
        }
        if self.eps_schedule.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Problem("eps_schedule entries must be positive".into()));
        }
        if self.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Problem("eps_schedule must be strictly decreasing".into()));
        }
        if !(self.inner_tol > 0.0) || self.max_inner_iters == 0 {
            return Err(Error::Problem("inner_tol and max_inner_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn contact_tol_for(&self, g: &ScalarField) -> f64 {
        self.contact_tol.unwrap_or(1e-6 * (1.0 + g.max_abs()))
    }
}

/// Solution of a discrete one-obstacle problem with diagnostics.
#[derive(Clone, Debug)]
pub struct VISolution {
    pub value: ScalarField,
    pub contact_mask: Mask,
    pub contact_tol: f64,
    /// ε levels actually solved.
    pub eps_used: Vec<f64>,
    /// `(1/ε)‖(u_ε − g)⁻‖_ℋ` per ε.
    pub penalty_residual: Vec<f64>,
    /// Max-norm change between consecutive ε levels.
    pub eps_deltas: Vec<f64>,
    /// Worst nodewise violation of the discrete complementarity conditions.
    pub vi_residual: f64,
    /// Total Newton iterations over all slices and ε levels.
    pub newton_iterations: usize,
    /// Max-norm change made by the limit step, if it was applied.
    pub limit_correction: Option<f64>,
}

/// Report of one penalized or relaxation march.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveDiagnostics {
    pub eps: Vec<f64>,
    pub penalty_residual: Vec<f64>,
    pub eps_deltas: Vec<f64>,
    pub vi_residual: f64,
    pub contact_nodes: usize,
    pub obstacle_sup: f64,
    pub newton_iterations: usize,
    pub limit_correction: Option<f64>,
}

impl VISolution {
    pub fn diagnostics(&self, g: &ScalarField) -> SolveDiagnostics {
        SolveDiagnostics {
            eps: self.eps_used.clone(),
            penalty_residual: self.penalty_residual.clone(),
            eps_deltas: self.eps_deltas.clone(),
            vi_residual: self.vi_residual,
            contact_nodes: self.contact_mask.count(),
            obstacle_sup: g.max_abs(),
            newton_iterations: self.newton_iterations,
            limit_correction: self.limit_correction,
        }
    }
}

/// Terminal and boundary data of a stopping problem: `g⁺`.
pub fn stopping_data(g: &ScalarField) -> ScalarField {
    g.positive_part()
}

/// Step matrices with Dirichlet rows, built once per solve.
pub(crate) struct StepMatrices {
    mats: Vec<SparseMatrix>,
    /// Penalty weights: mass on interior nodes, zero on the boundary.
    weights: Vec<Vec<f64>>,
}

impl StepMatrices {
    pub(crate) fn new(disc: &Discretization) -> Self {
        let boundary = disc.grid().boundary_mask();
        let mats = (0..disc.n_steps())
            .map(|k| disc.step_matrix(k, Boundary::Dirichlet))
            .collect();
        let weights = (0..disc.n_steps())
            .map(|k| {
                disc.slice(k)
                    .mass()
                    .iter()
                    .zip(boundary)
                    .map(|(&m, &b)| if b { 0.0 } else { m })
                    .collect()
            })
            .collect();
        Self { mats, weights }
    }
}

/// Problem data shared by the penalized and relaxation marches.
pub(crate) struct ObstacleData<'a> {
    pub obstacle: &'a ScalarField,
    pub source: Option<&'a ScalarField>,
    /// Read on boundary nodes of every slice and on the whole terminal slice.
    pub data: &'a ScalarField,
}

fn step_rhs_with_data(disc: &Discretization, k: usize, next: &[f64], p: &ObstacleData, out: &mut [f64]) {
    disc.step_rhs(k, next, p.source.map(|f| f.slice(k)), out);
    let d = p.data.slice(k);
    for (i, &b) in disc.grid().boundary_mask().iter().enumerate() {
        if b {
            out[i] = d[i];
        }
    }
}

/// Semismooth Newton for one step. `x` holds the warm start on entry.
fn newton_step(
    a: &SparseMatrix,
    weights: &[f64],
    g: &[f64],
    rhs: &[f64],
    inv_eps: f64,
    x: &mut [f64],
    cfg: &PenaltyConfig,
) -> Option<usize> {
    let n = x.len();
    let mut shift = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut active: Vec<bool> = (0..n).map(|i| weights[i] > 0.0 && x[i] < g[i]).collect();
    let mut damped = false;
    for it in 1..=cfg.max_inner_iters {
        for i in 0..n {
            shift[i] = if active[i] { weights[i] * inv_eps } else { 0.0 };
            b[i] = rhs[i] + shift[i] * g[i];
        }
        let lu = BandedLu::factor(a, Some(&shift))?;
        lu.solve_in_place(&mut b);
        if damped {
            for i in 0..n {
                x[i] += 0.5 * (b[i] - x[i]);
            }
        } else {
            x.copy_from_slice(&b);
        }
        let next: Vec<bool> = (0..n).map(|i| weights[i] > 0.0 && x[i] < g[i]).collect();
        let settled = next == active;
        active = next;
        if settled || damped {
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let pen = weights[i] * inv_eps;
                let f = a.row_dot(i, x) - pen * (g[i] - x[i]).max(0.0) - rhs[i];
                let scale = a.diag(i) + if active[i] { pen } else { 0.0 };
                worst = worst.max(f.abs() / scale);
            }
            if worst <= cfg.inner_tol {
                return Some(it);
            }
        }
        // the active set normally settles in a handful of steps; fall back
        // to damped updates if it keeps moving
        if it == cfg.max_inner_iters / 2 {
            damped = true;
        }
    }
    None
}

/// One backward march of the penalized equation at a single ε.
fn penalized_march(
    disc: &Discretization,
    steps: &StepMatrices,
    p: &ObstacleData,
    eps: f64,
    warm: Option<&ScalarField>,
    cfg: &PenaltyConfig,
) -> Result<(ScalarField, usize)> {
    let grid = disc.grid();
    let n_steps = disc.n_steps();
    let mut u = ScalarField::zeros(grid);
    u.slice_mut(n_steps).copy_from_slice(p.data.slice(n_steps));
    let mut rhs = vec![0.0; grid.n_space()];
    let inv_eps = 1.0 / eps;
    let mut iterations = 0;
    for k in (0..n_steps).rev() {
        let next = u.slice(k + 1).to_vec();
        step_rhs_with_data(disc, k, &next, p, &mut rhs);
        let mut x = match warm {
            Some(w) => w.slice(k).to_vec(),
            None => next.clone(),
        };
        let its = newton_step(&steps.mats[k], &steps.weights[k], p.obstacle.slice(k), &rhs, inv_eps, &mut x, cfg)
            .ok_or(Error::PenaltyDivergence { slice: k, eps })?;
        iterations += its;
        u.slice_mut(k).copy_from_slice(&x);
    }
    Ok((u, iterations))
}

fn penalty_norm(disc: &Discretization, u: &ScalarField, g: &ScalarField, eps: f64) -> f64 {
    let boundary = disc.grid().boundary_mask();
    let mut s = 0.0;
    for k in 0..disc.n_steps() {
        let m = disc.slice(k).mass();
        let (uk, gk) = (u.slice(k), g.slice(k));
        let mut t = 0.0;
        for i in 0..uk.len() {
            if !boundary[i] {
                let d = (gk[i] - uk[i]).max(0.0);
                t += m[i] * d * d;
            }
        }
        s += disc.grid().dt(k) * t;
    }
    s.sqrt() / eps
}

/// Exact solution of one step's complementarity problem `u ≥ g`,
/// `Au ≥ rhs`, `(u − g)·(Au − rhs) = 0` by primal-dual active sets,
/// starting from the contact set of `x`.
fn limit_step(a: &SparseMatrix, weights: &[f64], g: &[f64], rhs: &[f64], x: &mut [f64], max_iters: usize) -> bool {
    let n = x.len();
    let mut active: Vec<bool> = (0..n).map(|i| weights[i] > 0.0 && x[i] < g[i]).collect();
    let mut b = vec![0.0; n];
    for _ in 0..max_iters {
        let m = a.with_identity_rows(&active);
        let Some(lu) = BandedLu::factor(&m, None) else {
            return false;
        };
        for i in 0..n {
            b[i] = if active[i] { g[i] } else { rhs[i] };
        }
        lu.solve_in_place(&mut b);
        let next: Vec<bool> = (0..n)
            .map(|i| {
                if weights[i] == 0.0 {
                    false
                } else if active[i] {
                    // keep the node pinned while its multiplier is nonnegative
                    a.row_dot(i, &b) - rhs[i] >= 0.0
                } else {
                    b[i] < g[i]
                }
            })
            .collect();
        if next == active {
            x.copy_from_slice(&b);
            return true;
        }
        active = next;
    }
    false
}

/// Backward march of [`limit_step`], warm-started slice by slice from the
/// penalized solution. Returns `None` if some step fails to settle.
fn limit_march(
    disc: &Discretization,
    steps: &StepMatrices,
    p: &ObstacleData,
    warm: &ScalarField,
    max_iters: usize,
) -> Option<ScalarField> {
    let grid = disc.grid();
    let mut u = warm.clone();
    let mut rhs = vec![0.0; grid.n_space()];
    for k in (0..disc.n_steps()).rev() {
        let next = u.slice(k + 1).to_vec();
        step_rhs_with_data(disc, k, &next, p, &mut rhs);
        let mut x = warm.slice(k).to_vec();
        if !limit_step(&steps.mats[k], &steps.weights[k], p.obstacle.slice(k), &rhs, &mut x, max_iters) {
            return None;
        }
        u.slice_mut(k).copy_from_slice(&x);
    }
    Some(u)
}

/// Worst nodewise violation of `u ≥ g`, `r ≥ 0`, `min(r, u − g) = 0` where
/// `r` is the scaled step residual, over interior nodes of every step.
pub(crate) fn complementarity_residual(
    disc: &Discretization,
    steps: &StepMatrices,
    u: &ScalarField,
    p: &ObstacleData,
    upper: Option<&ScalarField>,
) -> f64 {
    let grid = disc.grid();
    let boundary = grid.boundary_mask();
    let mut rhs = vec![0.0; grid.n_space()];
    let mut worst: f64 = 0.0;
    for k in 0..disc.n_steps() {
        step_rhs_with_data(disc, k, u.slice(k + 1), p, &mut rhs);
        let a = &steps.mats[k];
        let (uk, gk) = (u.slice(k), p.obstacle.slice(k));
        for i in 0..uk.len() {
            if boundary[i] {
                continue;
            }
            let r = (a.row_dot(i, uk) - rhs[i]) / a.diag(i);
            let lo_gap = uk[i] - gk[i];
            let mut v = (-lo_gap).max(0.0);
            match upper {
                None => {
                    v = v.max((-r).max(0.0)).max(r.max(0.0).min(lo_gap.max(0.0)));
                }
                Some(h) => {
                    let hi_gap = h.slice(k)[i] - uk[i];
                    v = v.max((-hi_gap).max(0.0));
                    // r ≥ 0 unless at the upper obstacle, r ≤ 0 unless at the lower one
                    v = v.max((-r).max(0.0).min(hi_gap.max(0.0)));
                    v = v.max(r.max(0.0).min(lo_gap.max(0.0)));
                }
            }
            worst = worst.max(v);
        }
    }
    worst
}

fn check_obstacle(disc: &Discretization, g: &ScalarField) -> Result<()> {
    g.check_shape(disc.grid())?;
    if !g.is_finite() {
        return Err(Error::Problem("obstacle has non-finite values".into()));
    }
    Ok(())
}

/// Runs the ε schedule with warm starts and monotonicity checks.
pub(crate) fn solve_with_data(
    disc: &Discretization,
    steps: &StepMatrices,
    p: &ObstacleData,
    cfg: &PenaltyConfig,
) -> Result<VISolution> {
    cfg.validate()?;
    let mut current: Option<ScalarField> = None;
    let mut eps_used = Vec::new();
    let mut penalty_residual = Vec::new();
    let mut eps_deltas = Vec::new();
    let mut newton_iterations = 0;
    for &eps in &cfg.eps_schedule {
        let (u, its) = penalized_march(disc, steps, p, eps, current.as_ref(), cfg)?;
        newton_iterations += its;
        eps_used.push(eps);
        penalty_residual.push(penalty_norm(disc, &u, p.obstacle, eps));
        let mut stop = false;
        if let Some(prev) = &current {
            let drop = -u.min_diff(prev);
            if drop > MONOTONE_SLACK {
                return Err(Error::Scheme(format!(
                    "penalized solutions decreased by {drop:e} when eps went to {eps:e}"
                )));
            }
            let delta = u.max_abs_diff(prev);
            eps_deltas.push(delta);
            stop = delta < cfg.inner_tol;
        }
        current = Some(u);
        if stop {
            break;
        }
    }
    let mut value = current.expect("non-empty schedule");
    let mut limit_correction = None;
    if cfg.limit_step {
        if let Some(limit) = limit_march(disc, steps, p, &value, cfg.max_inner_iters) {
            let drop = -limit.min_diff(&value);
            if drop > MONOTONE_SLACK {
                return Err(Error::Scheme(format!("limit step decreased the penalized solution by {drop:e}")));
            }
            limit_correction = Some(limit.max_abs_diff(&value));
            value = limit;
        }
    }
    let contact_tol = cfg.contact_tol_for(p.obstacle);
    let contact_mask = Mask::from_fn(&value, |k, i| (value.get(k, i) - p.obstacle.get(k, i)).abs() <= contact_tol);
    let vi_residual = complementarity_residual(disc, steps, &value, p, None);
    Ok(VISolution {
        value,
        contact_mask,
        contact_tol,
        eps_used,
        penalty_residual,
        eps_deltas,
        vi_residual,
        newton_iterations,
        limit_correction,
    })
}

/// Penalized solution `g_ε` for a single `eps`, marched from scratch.
pub fn solve_penalized(disc: &Discretization, g: &ScalarField, eps: f64, cfg: &PenaltyConfig) -> Result<ScalarField> {
    check_obstacle(disc, g)?;
    if !(eps > 0.0) {
        return Err(Error::Problem(format!("eps must be positive, got {eps}")));
    }
    let data = stopping_data(g);
    let p = ObstacleData {
        obstacle: g,
        source: None,
        data: &data,
    };
    let steps = StepMatrices::new(disc);
    Ok(penalized_march(disc, &steps, &p, eps, None, cfg)?.0)
}

/// Smallest discrete α-potential dominating `g` (the value of the stopping
/// problem with reward `g`) and its contact set.
pub fn solve_obstacle(disc: &Discretization, g: &ScalarField, cfg: &PenaltyConfig) -> Result<VISolution> {
    check_obstacle(disc, g)?;
    let data = stopping_data(g);
    let steps = StepMatrices::new(disc);
    solve_with_data(
        disc,
        &steps,
        &ObstacleData {
            obstacle: g,
            source: None,
            data: &data,
        },
        cfg,
    )
}

/// Stopping with running reward `f`, by reduction: solve the plain problem
/// for `ĝ = g − R_α f` and add `R_α f` back.
pub fn solve_obstacle_with_cost(
    disc: &Discretization,
    g: &ScalarField,
    f: &ScalarField,
    cfg: &PenaltyConfig,
) -> Result<VISolution> {
    check_obstacle(disc, g)?;
    let r = resolvent_apply(disc, f)?;
    let reduced = g.sub(&r);
    let mut sol = solve_obstacle(disc, &reduced, cfg)?;
    sol.value = sol.value.add(&r);
    sol.contact_tol = cfg.contact_tol_for(g);
    let tol = sol.contact_tol;
    let value = &sol.value;
    sol.contact_mask = Mask::from_fn(value, |k, i| (value.get(k, i) - g.get(k, i)).abs() <= tol);
    Ok(sol)
}

/// Boundary and terminal data of the stopping problem with running reward
/// `f`: `max(g, R_α f)` on the box boundary and `g⁺` at the horizon.
pub fn cost_data(g: &ScalarField, resolvent: &ScalarField) -> ScalarField {
    g.zip_map(resolvent, f64::max)
}

/// Stopping with running reward `f`, solved directly: the penalized equation
/// carries `f` as a source term.
pub fn solve_obstacle_with_source(
    disc: &Discretization,
    g: &ScalarField,
    f: &ScalarField,
    cfg: &PenaltyConfig,
) -> Result<VISolution> {
    check_obstacle(disc, g)?;
    f.check_shape(disc.grid())?;
    let r = resolvent_apply(disc, f)?;
    let data = cost_data(g, &r);
    let steps = StepMatrices::new(disc);
    solve_with_data(
        disc,
        &steps,
        &ObstacleData {
            obstacle: g,
            source: Some(f),
            data: &data,
        },
        cfg,
    )
}

/// Samples admissible test fields `ψ ≥ g` (equal to `u` on the boundary and
/// at the horizon) and returns the smallest `ℰ_α(u, ψ) − ℰ_α(u, u)` seen,
/// counting the source term when `f` is given. The discrete variational
/// inequality holds when this is nonnegative.
pub fn vi_residual_check(
    disc: &Discretization,
    solution: &ScalarField,
    g: &ScalarField,
    f: Option<&ScalarField>,
    trial_count: usize,
    seed: u64,
) -> f64 {
    let grid = disc.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let t_max = grid.t_max();
    let lo: Vec<f64> = grid.axes().iter().map(|a| a.min()).collect();
    let hi: Vec<f64> = grid.axes().iter().map(|a| a.max()).collect();
    // ψ = u itself
    worst = worst.min(disc.scheme_form(solution, &ScalarField::zeros(grid), f));
    for trial in 0..trial_count {
        let tc = rng.random_range(0.0..t_max);
        let tw = rng.random_range(0.05..0.5) * t_max;
        let xc: Vec<f64> = (0..grid.dim()).map(|d| rng.random_range(lo[d]..hi[d])).collect();
        let xw: Vec<f64> = (0..grid.dim()).map(|d| rng.random_range(0.02..0.5) * (hi[d] - lo[d])).collect();
        let amp = rng.random_range(0.0..1.0) * (1.0 + g.max_abs());
        let bump = |t: f64, x: &[f64]| {
            let mut e = ((t - tc) / tw).powi(2);
            for d in 0..x.len() {
                e += ((x[d] - xc[d]) / xw[d]).powi(2);
            }
            amp * (-0.5 * e).exp()
        };
        let bump_field = ScalarField::from_fn(grid, bump);
        let psi = if trial % 2 == 0 {
            // u plus a nonnegative bump
            solution.add(&bump_field)
        } else {
            // g ∨ (u + signed smooth perturbation)
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let s = solution.zip_map(&bump_field, |u, b| u + sign * b);
            s.zip_map(g, f64::max)
        };
        let direction = admissible_direction(grid, solution, &psi);
        worst = worst.min(disc.scheme_form(solution, &direction, f));
    }
    worst
}

/// `ψ − u` with boundary nodes and the terminal slice pinned to zero.
fn admissible_direction(grid: &SpaceTimeGrid, u: &ScalarField, psi: &ScalarField) -> ScalarField {
    let n_last = grid.n_time() - 1;
    let boundary = grid.boundary_mask();
    let diff = psi.sub(u);
    let mut out = diff.clone();
    for k in 0..grid.n_time() {
        let s = out.slice_mut(k);
        for i in 0..s.len() {
            if k == n_last || boundary[i] {
                s[i] = 0.0;
            }
        }
    }
    out
}

/// Where a projected relaxation starts each time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationStart {
    /// The solution at the later time node.
    Previous,
    Lower,
    Upper,
}

/// Backward march solving, at every step, the box-constrained complementarity
/// problem `lower ≤ u ≤ upper` by projected SOR. Independent of the penalty
/// path; used as an oracle.
pub(crate) fn relaxation_march(
    disc: &Discretization,
    p: &ObstacleData,
    upper: Option<&ScalarField>,
    start: RelaxationStart,
    cfg: &RelaxationConfig,
) -> Result<ScalarField> {
    let grid = disc.grid();
    let n = grid.n_space();
    let boundary = grid.boundary_mask();
    let n_steps = disc.n_steps();
    let mut u = ScalarField::zeros(grid);
    u.slice_mut(n_steps).copy_from_slice(p.data.slice(n_steps));
    let mut rhs = vec![0.0; n];
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for k in (0..n_steps).rev() {
        let a = disc.step_matrix(k, Boundary::Dirichlet);
        let next = u.slice(k + 1).to_vec();
        step_rhs_with_data(disc, k, &next, p, &mut rhs);
        let d = p.data.slice(k);
        for i in 0..n {
            if boundary[i] {
                lo[i] = d[i];
                hi[i] = d[i];
            } else {
                lo[i] = p.obstacle.slice(k)[i];
                hi[i] = upper.map_or(f64::INFINITY, |h| h.slice(k)[i]);
            }
        }
        let mut x: Vec<f64> = match start {
            RelaxationStart::Previous => next,
            RelaxationStart::Lower => lo.clone(),
            RelaxationStart::Upper => (0..n).map(|i| if hi[i].is_finite() { hi[i] } else { lo[i] }).collect(),
        };
        let stats = projected_sor(&a, &rhs, &lo, &hi, &mut x, cfg);
        if !stats.converged {
            return Err(Error::RelaxationDivergence {
                slice: k,
                sweeps: stats.sweeps,
            });
        }
        u.slice_mut(k).copy_from_slice(&x);
    }
    Ok(u)
}

/// Projected-relaxation solution of the same discrete complementarity
/// problem that [`solve_obstacle`] approximates by penalization.
pub fn obstacle_oracle(disc: &Discretization, g: &ScalarField, cfg: &RelaxationConfig) -> Result<ScalarField> {
    check_obstacle(disc, g)?;
    let data = stopping_data(g);
    relaxation_march(
        disc,
        &ObstacleData {
            obstacle: g,
            source: None,
            data: &data,
        },
        None,
        RelaxationStart::Previous,
        cfg,
    )
}

/// Projected-relaxation counterpart of [`solve_obstacle_with_source`].
pub fn obstacle_oracle_with_source(
    disc: &Discretization,
    g: &ScalarField,
    f: &ScalarField,
    cfg: &RelaxationConfig,
) -> Result<ScalarField> {
    check_obstacle(disc, g)?;
    f.check_shape(disc.grid())?;
    let data = cost_data(g, &resolvent_apply(disc, f)?);
    relaxation_march(
        disc,
        &ObstacleData {
            obstacle: g,
            source: Some(f),
            data: &data,
        },
        None,
        RelaxationStart::Previous,
        cfg,
    )
}
