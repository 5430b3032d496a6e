//! Zero-sum Dynkin games with lower obstacle `g` (paid to the maximizer when
//! she stops first) and upper obstacle `h` (paid when the minimizer stops).
//!
//! The value `w̄ = φ̄ − ψ̄` is built from two increasing sequences of
//! α-potentials, each half-step being a one-obstacle solve:
//!
//! ```text
//! φ₀ = ψ₀ = 0,   ψₙ = e(φₙ₋₁ − h),   φₙ = e(ψₙ + g)
//! ```
//!
//! On the grid, boundary nodes and the terminal slice take the data
//! `median(g, 0, h)`, which is what the fixed point of the sequence
//! produces there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{resolvent_apply, Discretization};
use crate::grid::{Mask, ScalarField};
use crate::linalg::RelaxationConfig;
use crate::obstacle::{
    complementarity_residual, relaxation_march, solve_with_data, stopping_data, ObstacleData, PenaltyConfig,
    RelaxationStart, StepMatrices, MONOTONE_SLACK,
};

/// Allowed excess of `φₙ` over `v₁` (and `ψₙ` over `v₂`).
pub const WITNESS_SLACK: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct GameProblem {
    g: ScalarField,
    h: ScalarField,
    f: Option<ScalarField>,
    witness: Option<(ScalarField, ScalarField)>,
}

impl GameProblem {
    /// Checks `g ≤ h` nodewise and, when a witness `(v₁, v₂)` is given,
    /// `g ≤ v₁ − v₂ ≤ h`.
    pub fn new(
        disc: &Discretization,
        g: ScalarField,
        h: ScalarField,
        f: Option<ScalarField>,
        witness: Option<(ScalarField, ScalarField)>,
    ) -> Result<Self> {
        let grid = disc.grid();
        g.check_shape(grid)?;
        h.check_shape(grid)?;
        for field in [Some(&g), Some(&h), f.as_ref()].into_iter().flatten() {
            if !field.is_finite() {
                return Err(Error::Problem("game data has non-finite values".into()));
            }
        }
        if let Some(f) = &f {
            f.check_shape(grid)?;
        }
        let locate = |idx: usize| {
            let (k, i) = (idx / grid.n_space(), idx % grid.n_space());
            let p = grid.point(i);
            (grid.t_nodes()[k], p[..grid.dim()].to_vec())
        };
        if let Some(idx) = g.values().iter().zip(h.values()).position(|(a, b)| a > b) {
            let (t, x) = locate(idx);
            return Err(Error::Problem(format!(
                "lower obstacle exceeds upper obstacle (g > h) at t = {t}, x = {x:?}"
            )));
        }
        if let Some((v1, v2)) = &witness {
            v1.check_shape(grid)?;
            v2.check_shape(grid)?;
            let d = v1.sub(v2);
            let bad = (0..d.values().len()).find(|&j| {
                let w = d.values()[j];
                w < g.values()[j] - WITNESS_SLACK || w > h.values()[j] + WITNESS_SLACK
            });
            if let Some(idx) = bad {
                let (t, x) = locate(idx);
                return Err(Error::Problem(format!(
                    "separability witness violates g ≤ v1 − v2 ≤ h at t = {t}, x = {x:?}"
                )));
            }
        }
        Ok(Self { g, h, f, witness })
    }

    pub fn g(&self) -> &ScalarField {
        &self.g
    }

    pub fn h(&self) -> &ScalarField {
        &self.h
    }

    pub fn f(&self) -> Option<&ScalarField> {
        self.f.as_ref()
    }

    pub fn witness(&self) -> Option<&(ScalarField, ScalarField)> {
        self.witness.as_ref()
    }

    fn has_cost(&self) -> bool {
        self.f.as_ref().is_some_and(|f| f.max_abs() > 0.0)
    }
}

/// `outer_tol` also bounds how far `w̄` can sit above `h`, since
/// `φₙ − ψₙ ≤ h + (φₙ − φₙ₋₁)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    pub penalty: PenaltyConfig,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-10,
            max_outer_iters: 200,
            penalty: PenaltyConfig::default(),
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0) || self.max_outer_iters == 0 {
            return Err(Error::Problem("outer_tol and max_outer_iters must be positive".into()));
        }
        self.penalty.validate()
    }
}

/// One outer iteration of the alternating scheme.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    /// `max(‖φₙ − φₙ₋₁‖∞, ‖ψₙ − ψₙ₋₁‖∞)`.
    pub delta: f64,
    /// `min(φₙ − φₙ₋₁)`, which must stay above `−MONOTONE_SLACK`.
    pub phi_increment_min: f64,
    pub psi_increment_min: f64,
}

#[derive(Clone, Debug)]
pub struct GameSolution {
    pub phi_bar: ScalarField,
    pub psi_bar: ScalarField,
    /// `phi_bar − psi_bar`.
    pub w_bar: ScalarField,
    /// Where the maximizer stops: `{|w̄ − g| ≤ tol}`.
    pub stop_region_sigma: Mask,
    /// Where the minimizer stops: `{|w̄ − h| ≤ tol}`.
    pub stop_region_tau: Mask,
    pub contact_tol: f64,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GameDiagnostics {
    pub iterations: usize,
    pub deltas: Vec<f64>,
    pub phi_increment_min: f64,
    pub psi_increment_min: f64,
    pub sigma_region_nodes: usize,
    pub tau_region_nodes: usize,
    pub sandwich_violation: f64,
}

impl GameSolution {
    pub fn diagnostics(&self, g: &ScalarField, h: &ScalarField) -> GameDiagnostics {
        let min_of = |f: fn(&IterationRecord) -> f64| self.history.iter().map(f).fold(f64::INFINITY, f64::min);
        GameDiagnostics {
            iterations: self.iterations,
            deltas: self.history.iter().map(|r| r.delta).collect(),
            phi_increment_min: min_of(|r| r.phi_increment_min),
            psi_increment_min: min_of(|r| r.psi_increment_min),
            sigma_region_nodes: self.stop_region_sigma.count(),
            tau_region_nodes: self.stop_region_tau.count(),
            sandwich_violation: sandwich_violation(&self.w_bar, g, h),
        }
    }
}

/// Largest amount by which `w` leaves `[g, h]`.
pub fn sandwich_violation(w: &ScalarField, g: &ScalarField, h: &ScalarField) -> f64 {
    let below = -w.min_diff(g);
    let above = -h.min_diff(w);
    below.max(above).max(0.0)
}

/// `median(lo, mid, hi)` for `lo ≤ hi`.
pub fn game_data(g: &ScalarField, mid: &ScalarField, h: &ScalarField) -> ScalarField {
    g.zip_map(mid, f64::max).zip_map(h, f64::min)
}

/// Masks `{|w − g| ≤ tol}` and `{|w − h| ≤ tol}`.
pub fn extract_saddle_regions(w: &ScalarField, g: &ScalarField, h: &ScalarField, contact_tol: f64) -> (Mask, Mask) {
    let sigma = Mask::from_fn(w, |k, i| (w.get(k, i) - g.get(k, i)).abs() <= contact_tol);
    let tau = Mask::from_fn(w, |k, i| (w.get(k, i) - h.get(k, i)).abs() <= contact_tol);
    (sigma, tau)
}

fn contact_tol_for(cfg: &GameConfig, g: &ScalarField, h: &ScalarField) -> f64 {
    cfg.penalty
        .contact_tol
        .unwrap_or(1e-6 * (1.0 + g.max_abs().max(h.max_abs())))
}

fn potential(disc: &Discretization, steps: &StepMatrices, obstacle: &ScalarField, cfg: &PenaltyConfig) -> Result<ScalarField> {
    let data = stopping_data(obstacle);
    let p = ObstacleData {
        obstacle,
        source: None,
        data: &data,
    };
    Ok(solve_with_data(disc, steps, &p, cfg)?.value)
}

/// Runs the alternating sequence until the outer delta drops below
/// `outer_tol`. The problem must carry no holding cost; see
/// [`solve_game_with_cost`].
pub fn iterate_game(disc: &Discretization, prob: &GameProblem, cfg: &GameConfig) -> Result<GameSolution> {
    cfg.validate()?;
    if prob.has_cost() {
        return Err(Error::Problem(
            "iterate_game expects zero holding cost; use solve_game_with_cost".into(),
        ));
    }
    let grid = disc.grid();
    let steps = StepMatrices::new(disc);
    let (g, h) = (&prob.g, &prob.h);
    let mut phi = ScalarField::zeros(grid);
    let mut psi = ScalarField::zeros(grid);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_outer_iters {
        let psi_next = potential(disc, &steps, &phi.sub(h), &cfg.penalty)?;
        let phi_next = potential(disc, &steps, &psi_next.add(g), &cfg.penalty)?;
        let record = IterationRecord {
            delta: phi_next.max_abs_diff(&phi).max(psi_next.max_abs_diff(&psi)),
            phi_increment_min: phi_next.min_diff(&phi),
            psi_increment_min: psi_next.min_diff(&psi),
        };
        let n = history.len() + 1;
        if record.phi_increment_min < -MONOTONE_SLACK || record.psi_increment_min < -MONOTONE_SLACK {
            return Err(Error::Scheme(format!(
                "game iterates decreased at n = {n} (phi {:e}, psi {:e})",
                record.phi_increment_min, record.psi_increment_min
            )));
        }
        if let Some((v1, v2)) = &prob.witness {
            let over = (-v1.min_diff(&phi_next)).max(-v2.min_diff(&psi_next));
            if over > WITNESS_SLACK {
                return Err(Error::Scheme(format!(
                    "game iterates exceed the separability witness by {over:e} at n = {n}"
                )));
            }
        }
        let done = record.delta < cfg.outer_tol;
        history.push(record);
        phi = phi_next;
        psi = psi_next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::GameDivergence {
            iterations: history.len(),
            delta: history.last().map_or(f64::NAN, |r| r.delta),
        });
    }
    let w = phi.sub(&psi);
    let contact_tol = contact_tol_for(cfg, g, h);
    let (sigma, tau) = extract_saddle_regions(&w, g, h, contact_tol);
    Ok(GameSolution {
        phi_bar: phi,
        psi_bar: psi,
        w_bar: w,
        stop_region_sigma: sigma,
        stop_region_tau: tau,
        contact_tol,
        iterations: history.len(),
        history,
    })
}

/// Game with running reward `f`: iterate on `ĝ = g − R_α f`, `ĥ = h − R_α f`
/// and add `R_α f` back. `phi_bar` absorbs the resolvent so that
/// `w_bar = phi_bar − psi_bar` still holds; stop regions are taken against
/// the original obstacles.
pub fn solve_game_with_cost(disc: &Discretization, prob: &GameProblem, cfg: &GameConfig) -> Result<GameSolution> {
    if !prob.has_cost() {
        return iterate_game(disc, prob, cfg);
    }
    let r = resolvent_apply(disc, prob.f.as_ref().expect("cost present"))?;
    let reduced = GameProblem {
        g: prob.g.sub(&r),
        h: prob.h.sub(&r),
        f: None,
        witness: None,
    };
    let mut sol = iterate_game(disc, &reduced, cfg)?;
    sol.phi_bar = sol.phi_bar.add(&r);
    sol.w_bar = sol.w_bar.add(&r);
    sol.contact_tol = contact_tol_for(cfg, &prob.g, &prob.h);
    let (sigma, tau) = extract_saddle_regions(&sol.w_bar, &prob.g, &prob.h, sol.contact_tol);
    sol.stop_region_sigma = sigma;
    sol.stop_region_tau = tau;
    Ok(sol)
}

/// Boundary and terminal data of the (possibly cost-carrying) game:
/// `median(g, R_α f, h)`, which is `median(g, 0, h)` without cost.
pub fn boundary_data(disc: &Discretization, prob: &GameProblem) -> Result<ScalarField> {
    let mid = match prob.f.as_ref() {
        Some(f) => resolvent_apply(disc, f)?,
        None => ScalarField::zeros(disc.grid()),
    };
    Ok(game_data(&prob.g, &mid, &prob.h))
}

/// Direct solution of the double-obstacle complementarity problem
/// `g ≤ u ≤ h` by projected relaxation at every backward step, with the
/// holding cost as a source term. Shares no code with the alternating
/// iteration beyond the step matrices.
pub fn double_obstacle_oracle(
    disc: &Discretization,
    prob: &GameProblem,
    start: RelaxationStart,
    cfg: &RelaxationConfig,
) -> Result<ScalarField> {
    let data = boundary_data(disc, prob)?;
    relaxation_march(
        disc,
        &ObstacleData {
            obstacle: &prob.g,
            source: prob.f.as_ref(),
            data: &data,
        },
        Some(&prob.h),
        start,
        cfg,
    )
}

/// Worst nodewise violation of the double-obstacle complementarity
/// conditions by `u`.
pub fn double_obstacle_residual(disc: &Discretization, prob: &GameProblem, u: &ScalarField) -> Result<f64> {
    u.check_shape(disc.grid())?;
    let data = boundary_data(disc, prob)?;
    let steps = StepMatrices::new(disc);
    Ok(complementarity_residual(
        disc,
        &steps,
        u,
        &ObstacleData {
            obstacle: &prob.g,
            source: prob.f.as_ref(),
            data: &data,
        },
        Some(&prob.h),
    ))
}

/// Re-solves `φ̄ = e(ψ̄ + g)` and `ψ̄ = e(φ̄ − h)` once and returns the
/// larger max-norm change.
pub fn fixed_point_defect(disc: &Discretization, prob: &GameProblem, sol: &GameSolution, cfg: &GameConfig) -> Result<f64> {
    let steps = StepMatrices::new(disc);
    let phi = potential(disc, &steps, &sol.psi_bar.add(&prob.g), &cfg.penalty)?;
    let psi = potential(disc, &steps, &sol.phi_bar.sub(&prob.h), &cfg.penalty)?;
    Ok(phi.max_abs_diff(&sol.phi_bar).max(psi.max_abs_diff(&sol.psi_bar)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, SpaceTimeGrid};
    use crate::model::{DensityMode, DiffusionModel, DiffusionSpec, DriftSpec};
    use crate::obstacle::solve_obstacle;

    fn disc(b: f64, nodes: usize, steps: usize) -> Discretization {
        let model = DiffusionModel::new(
            1,
            DriftSpec::Constant { b: vec![b] },
            DiffusionSpec::Constant { a: vec![vec![0.6]] },
            0.2,
            DensityMode::ClosedForm,
        )
        .unwrap();
        let grid = SpaceTimeGrid::uniform(1.0, steps, vec![Axis::uniform(-1.0, 1.0, nodes).unwrap()]).unwrap();
        Discretization::new(model, grid).unwrap()
    }

    fn put_game(d: &Discretization, delta: f64) -> GameProblem {
        let g = ScalarField::from_fn(d.grid(), |_, x| (0.1 - x[0]).max(0.0));
        let h = g.map(|v| v + delta);
        GameProblem::new(d, g, h, None, None).unwrap()
    }

    #[test]
    fn rejects_crossed_obstacles() {
        let d = disc(0.0, 11, 4);
        let g = ScalarField::constant(d.grid(), 1.0);
        let h = ScalarField::from_fn(d.grid(), |_, x| if x[0] > 0.5 { 0.0 } else { 2.0 });
        let err = GameProblem::new(&d, g, h, None, None).unwrap_err();
        assert!(err.to_string().contains("g > h"), "{err}");
    }

    #[test]
    fn equal_obstacles_pin_the_value() {
        let d = disc(0.3, 21, 10);
        let f = ScalarField::from_fn(d.grid(), |t, x| x[0] * (1.0 + t));
        let prob = GameProblem::new(&d, f.clone(), f.clone(), None, None).unwrap();
        let sol = iterate_game(&d, &prob, &GameConfig::default()).unwrap();
        assert!(sol.w_bar.max_abs_diff(&f) < 1e-7);
        assert_eq!(sol.stop_region_sigma.count(), d.grid().n_nodes());
        assert_eq!(sol.stop_region_tau.count(), d.grid().n_nodes());
        let oracle = double_obstacle_oracle(&d, &prob, RelaxationStart::Previous, &RelaxationConfig::default()).unwrap();
        assert!(oracle.max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn symmetric_game_has_zero_value() {
        let d = disc(0.0, 21, 10);
        let c = 0.5;
        let g = ScalarField::constant(d.grid(), -c);
        let h = ScalarField::constant(d.grid(), c);
        let prob = GameProblem::new(&d, g, h, None, None).unwrap();
        let sol = iterate_game(&d, &prob, &GameConfig::default()).unwrap();
        assert!(sol.w_bar.max_abs() <= 1e-6);
        assert_eq!(sol.stop_region_sigma.count(), 0);
        assert_eq!(sol.stop_region_tau.count(), 0);
    }

    #[test]
    fn iteration_matches_oracle_and_is_a_fixed_point() {
        let d = disc(0.2, 41, 20);
        let prob = put_game(&d, 0.02);
        let cfg = GameConfig::default();
        let sol = iterate_game(&d, &prob, &cfg).unwrap();
        let sv = sandwich_violation(&sol.w_bar, prob.g(), prob.h());
        assert!(sv <= 1e-9, "{sv} after {}", sol.iterations);
        for r in &sol.history {
            assert!(r.phi_increment_min >= -1e-9 && r.psi_increment_min >= -1e-9);
        }
        let cfg_r = RelaxationConfig::default();
        for start in [RelaxationStart::Lower, RelaxationStart::Upper] {
            let oracle = double_obstacle_oracle(&d, &prob, start, &cfg_r).unwrap();
            assert!(sol.w_bar.max_abs_diff(&oracle) < 1e-6, "{}", sol.w_bar.max_abs_diff(&oracle));
            assert!(double_obstacle_residual(&d, &prob, &oracle).unwrap() < 1e-9);
        }
        assert!(fixed_point_defect(&d, &prob, &sol, &cfg).unwrap() < cfg.outer_tol);
        assert!(sol.stop_region_sigma.count() > 0);
        assert!(sol.stop_region_tau.count() > 0);
    }

    #[test]
    fn huge_upper_obstacle_reduces_to_stopping() {
        let d = disc(0.2, 41, 20);
        let g = ScalarField::from_fn(d.grid(), |_, x| (0.1 - x[0]).max(0.0));
        let h = ScalarField::constant(d.grid(), 1e6);
        let prob = GameProblem::new(&d, g.clone(), h, None, None).unwrap();
        let oracle = double_obstacle_oracle(&d, &prob, RelaxationStart::Previous, &RelaxationConfig::default()).unwrap();
        let stop = solve_obstacle(&d, &g, &PenaltyConfig::default()).unwrap();
        assert!(oracle.max_abs_diff(&stop.value) < 1e-6);
    }

    #[test]
    fn witness_bounds_iterates() {
        let d = disc(0.2, 21, 10);
        let prob = put_game(&d, 0.05);
        // v₁ = h⁺-dominating constant, v₂ = v₁ − h pins v₁ − v₂ = h
        let v1 = ScalarField::constant(d.grid(), 2.0);
        let v2 = v1.sub(prob.h());
        let with = GameProblem::new(&d, prob.g().clone(), prob.h().clone(), None, Some((v1, v2))).unwrap();
        assert!(iterate_game(&d, &with, &GameConfig::default()).is_ok());
        // a witness outside the sandwich is rejected at construction
        let bad = GameProblem::new(
            &d,
            prob.g().clone(),
            prob.h().clone(),
            None,
            Some((ScalarField::constant(d.grid(), 5.0), ScalarField::zeros(d.grid()))),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn cost_game_reduction_matches_direct_oracle() {
        let d = disc(0.2, 41, 20);
        let g = ScalarField::from_fn(d.grid(), |_, x| (0.1 - x[0]).max(0.0) - 0.05);
        let h = g.map(|v| v + 0.08);
        let f = ScalarField::from_fn(d.grid(), |_, x| 0.05 * x[0]);
        let prob = GameProblem::new(&d, g, h, Some(f), None).unwrap();
        let sol = solve_game_with_cost(&d, &prob, &GameConfig::default()).unwrap();
        let oracle = double_obstacle_oracle(&d, &prob, RelaxationStart::Previous, &RelaxationConfig::default()).unwrap();
        assert!(sol.w_bar.max_abs_diff(&oracle) < 1e-6, "{}", sol.w_bar.max_abs_diff(&oracle));
        let sv = sandwich_violation(&sol.w_bar, prob.g(), prob.h());
        assert!(sv <= 1e-9, "{sv} after {}", sol.iterations);
        assert!(iterate_game(&d, &prob, &GameConfig::default()).is_err());
    }
}
