//! Monte Carlo evaluation of stopping rules and game payoffs by simulating
//! the diffusion with Euler–Maruyama.
//!
//! Every path is a pure function of `(seed, path index)`: path `j` draws its
//! normals from a ChaCha8 stream selected by `j` (or by `j/2` with
//! antithetic pairs). All policies of one check are evaluated on the same
//! simulated trajectory, and per-path results are reduced in index order, so
//! estimates are bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{Mask, ScalarField, SpaceTimeGrid};
use crate::model::{DiffusionModel, Vector, MAX_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MCConfig {
    pub n_paths: usize,
    /// Simulation step; `None` means a quarter of the grid's largest `Δt`.
    pub dt: Option<f64>,
    pub seed: u64,
    pub antithetic: bool,
    /// Multiple of `Δx + Δt` added to statistical bounds.
    pub scheme_tol_factor: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: None,
            seed: 0,
            antithetic: false,
            scheme_tol_factor: 0.1,
            execution: Execution::default(),
        }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 100 {
            return Err(Error::Simulation(format!("n_paths must be at least 100, got {}", self.n_paths)));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::Simulation("antithetic sampling needs an even n_paths".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Simulation(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.scheme_tol_factor >= 0.0) {
            return Err(Error::Simulation("scheme_tol_factor must be nonnegative".into()));
        }
        Ok(())
    }

    /// Discretization allowance `C·(Δx + Δt)` for comparisons with a solver
    /// value on `grid`.
    pub fn scheme_tol(&self, grid: &SpaceTimeGrid) -> f64 {
        self.scheme_tol_factor * (grid.max_dx() + grid.max_dt())
    }
}

/// Initial time-space point `z = (s, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartPoint {
    pub s: f64,
    pub x: Vector,
}

impl StartPoint {
    pub fn new(s: f64, x: &[f64]) -> Self {
        let mut p = [0.0; MAX_DIM];
        p[..x.len()].copy_from_slice(x);
        Self { s, x: p }
    }
}

/// Grid cell and interpolation weights of a trajectory point.
#[derive(Clone, Copy, Debug, Default)]
struct Located {
    k: usize,
    th: f64,
    idx: [usize; MAX_DIM],
    frac: [f64; MAX_DIM],
}

fn locate(grid: &SpaceTimeGrid, t: f64, x: &[f64]) -> Located {
    let (k, th) = grid.locate_time(t);
    let mut loc = Located {
        k,
        th,
        ..Located::default()
    };
    for (d, ax) in grid.axes().iter().enumerate() {
        let (i, p) = ax.locate(x[d]);
        loc.idx[d] = i;
        loc.frac[d] = p;
    }
    loc
}

fn slice_value(s: &[f64], grid: &SpaceTimeGrid, l: &Located) -> f64 {
    let (i, p) = (l.idx[0], l.frac[0]);
    if grid.dim() == 1 {
        return (1.0 - p) * s[i] + p * s[i + 1];
    }
    let n0 = grid.axes()[0].len();
    let (j, q) = (l.idx[1], l.frac[1]);
    let r0 = (1.0 - p) * s[i + n0 * j] + p * s[i + 1 + n0 * j];
    let r1 = (1.0 - p) * s[i + n0 * (j + 1)] + p * s[i + 1 + n0 * (j + 1)];
    (1.0 - q) * r0 + q * r1
}

fn value_at(field: &ScalarField, grid: &SpaceTimeGrid, l: &Located) -> f64 {
    let a = slice_value(field.slice(l.k), grid, l);
    if l.th == 0.0 {
        return a;
    }
    (1.0 - l.th) * a + l.th * slice_value(field.slice(l.k + 1), grid, l)
}

/// One simulated time-space trajectory, from the start until the horizon or
/// the first step outside the box. An exiting state is projected onto the
/// box.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    /// Elapsed time since the start.
    elapsed: Vec<f64>,
    states: Vec<Vector>,
    located: Vec<Located>,
    exited: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.elapsed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elapsed.is_empty()
    }

    pub fn elapsed(&self) -> &[f64] {
        &self.elapsed
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    /// Whether the path left the spatial box before the horizon.
    pub fn exited(&self) -> bool {
        self.exited
    }

    /// First index whose elapsed time reaches `t` (the last index if none).
    pub fn index_at(&self, t: f64) -> usize {
        self.elapsed
            .partition_point(|&e| e < t - 1e-12)
            .min(self.len() - 1)
    }

    fn clear(&mut self) {
        self.elapsed.clear();
        self.states.clear();
        self.located.clear();
        self.exited = false;
    }
}

/// Euler–Maruyama simulator on the time window and box of a grid.
#[derive(Clone, Debug)]
pub struct PathSimulator<'a> {
    model: &'a DiffusionModel,
    grid: &'a SpaceTimeGrid,
    cfg: MCConfig,
    dt: f64,
}

impl<'a> PathSimulator<'a> {
    pub fn new(model: &'a DiffusionModel, grid: &'a SpaceTimeGrid, cfg: &MCConfig) -> Result<Self> {
        cfg.validate()?;
        if model.dim() != grid.dim() {
            return Err(Error::Simulation("model and grid dimensions differ".into()));
        }
        let dt = cfg.dt.unwrap_or(0.25 * grid.max_dt());
        Ok(Self {
            model,
            grid,
            cfg: cfg.clone(),
            dt,
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.grid
    }

    pub fn model(&self) -> &DiffusionModel {
        self.model
    }

    pub fn config(&self) -> &MCConfig {
        &self.cfg
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of independent samples: paths, or antithetic pairs.
    pub fn n_samples(&self) -> usize {
        if self.cfg.antithetic {
            self.cfg.n_paths / 2
        } else {
            self.cfg.n_paths
        }
    }

    fn check_start(&self, start: &StartPoint) -> Result<()> {
        let dim = self.grid.dim();
        if !(start.s >= 0.0 && start.s < self.grid.t_max()) {
            return Err(Error::Simulation(format!(
                "start time {} outside [0, {})",
                start.s,
                self.grid.t_max()
            )));
        }
        if !self.grid.contains(&start.x[..dim]) {
            return Err(Error::Simulation(format!("start point {:?} outside the grid box", &start.x[..dim])));
        }
        Ok(())
    }

    /// Simulates the path of RNG stream `stream` into `out`. `sign = −1` flips
    /// every normal increment (antithetic partner).
    fn simulate_into(&self, start: &StartPoint, stream: u64, sign: f64, out: &mut Trajectory) {
        let model = self.model;
        let grid = self.grid;
        let dim = grid.dim();
        let m = model.noise_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream);
        out.clear();
        let horizon = grid.t_max() - start.s;
        let mut x = start.x;
        let mut e = 0.0;
        let mut dw = [0.0; 2 * MAX_DIM];
        loop {
            out.elapsed.push(e);
            out.states.push(x);
            out.located.push(locate(grid, start.s + e, &x[..dim]));
            if e >= horizon - 1e-12 || out.exited {
                break;
            }
            let h = self.dt.min(horizon - e);
            let t = start.s + e;
            let sq = h.sqrt();
            for w in dw.iter_mut().take(m) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = sign * sq * z;
            }
            let b = model.drift(t, &x[..dim]);
            let a = model.diffuse(t, &x[..dim], &dw[..m]);
            for d in 0..dim {
                x[d] += b[d] * h + a[d];
            }
            e = if horizon - (e + h) < 1e-12 { horizon } else { e + h };
            if !grid.contains(&x[..dim]) {
                for (d, ax) in grid.axes().iter().enumerate() {
                    x[d] = x[d].clamp(ax.min(), ax.max());
                }
                out.exited = true;
            }
        }
    }

    /// Simulates one path (stream `path`) into a fresh trajectory.
    pub fn simulate(&self, start: &StartPoint, path: u64) -> Result<Trajectory> {
        self.check_start(start)?;
        let mut t = Trajectory::default();
        self.simulate_into(start, path, 1.0, &mut t);
        Ok(t)
    }

    /// Evaluates `eval` on every path and reduces antithetic pairs by
    /// averaging. Returns one row of `n_out` values per sample, in order.
    pub fn sample<F>(&self, start: &StartPoint, n_out: usize, eval: F) -> Result<SampleSet>
    where
        F: Fn(&Trajectory, &mut [f64], &mut [bool]) + Sync + Send,
    {
        self.check_start(start)?;
        let anti = self.cfg.antithetic;
        let rows = self.cfg.execution.map_indexed_with(
            self.n_samples(),
            Trajectory::default,
            |traj, j| {
                let mut vals = vec![0.0; n_out];
                let mut trunc = vec![false; n_out];
                let mut trunc_count = vec![0u8; n_out];
                self.simulate_into(start, j as u64, 1.0, traj);
                eval(traj, &mut vals, &mut trunc);
                for (c, &t) in trunc_count.iter_mut().zip(&trunc) {
                    *c += t as u8;
                }
                if anti {
                    let mut v2 = vec![0.0; n_out];
                    trunc.iter_mut().for_each(|t| *t = false);
                    self.simulate_into(start, j as u64, -1.0, traj);
                    eval(traj, &mut v2, &mut trunc);
                    for i in 0..n_out {
                        vals[i] = 0.5 * (vals[i] + v2[i]);
                        trunc_count[i] += trunc[i] as u8;
                    }
                }
                (vals, trunc_count)
            },
        );
        let n = rows.len();
        let mut values = vec![Vec::with_capacity(n); n_out];
        let mut truncated = vec![0usize; n_out];
        for (vals, tc) in rows {
            for i in 0..n_out {
                values[i].push(vals[i]);
                truncated[i] += tc[i] as usize;
            }
        }
        Ok(SampleSet {
            values,
            truncated,
            n_paths: self.cfg.n_paths,
        })
    }
}

/// Per-sample outputs of one simulation run.
#[derive(Clone, Debug)]
pub struct SampleSet {
    values: Vec<Vec<f64>>,
    truncated: Vec<usize>,
    n_paths: usize,
}

impl SampleSet {
    pub fn n_outputs(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn estimate(&self, i: usize) -> MCEstimate {
        let mut e = MCEstimate::from_samples(&self.values[i]);
        e.truncation_rate = self.truncated[i] as f64 / self.n_paths as f64;
        e
    }

    /// Estimate of `output i − output j` on common random numbers.
    pub fn difference(&self, i: usize, j: usize) -> MCEstimate {
        let d: Vec<f64> = self.values[i].iter().zip(&self.values[j]).map(|(a, b)| a - b).collect();
        MCEstimate::from_samples(&d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_effective: usize,
    /// Fraction of paths that reached the horizon or left the box before
    /// stopping.
    pub truncation_rate: f64,
}

impl MCEstimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len();
        // shifting by the first sample keeps constant samples exact
        let shift = x.first().copied().unwrap_or(0.0);
        let mean = shift + x.iter().map(|v| v - shift).sum::<f64>() / n as f64;
        let var = if n > 1 {
            x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n_effective: n,
            truncation_rate: 0.0,
        }
    }
}

/// Hitting region given by a grid mask. A point belongs to the region when
/// the multilinear interpolant (in `t` and `x`) of the mask's indicator is
/// at least one half.
#[derive(Clone, Debug)]
pub struct PolicyRegion {
    mask: Mask,
    indicator: ScalarField,
}

impl PolicyRegion {
    pub fn from_mask(mask: Mask) -> Self {
        let indicator = mask.to_field();
        Self { mask, indicator }
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn contains(&self, grid: &SpaceTimeGrid, t: f64, x: &[f64]) -> bool {
        self.indicator.interpolate(grid, t, x) >= 0.5
    }

    fn contains_located(&self, grid: &SpaceTimeGrid, l: &Located) -> bool {
        value_at(&self.indicator, grid, l) >= 0.5
    }

    /// Grows the region by `k` cells in every spatial direction, slice by
    /// slice.
    pub fn dilate(&self, grid: &SpaceTimeGrid, k: usize) -> Self {
        Self::from_mask(morph(&self.mask, grid, k, true))
    }

    /// Shrinks the region by `k` cells.
    pub fn erode(&self, grid: &SpaceTimeGrid, k: usize) -> Self {
        Self::from_mask(morph(&self.mask, grid, k, false))
    }
}

fn morph(mask: &Mask, grid: &SpaceTimeGrid, k: usize, dilate: bool) -> Mask {
    let shape = grid.shape();
    let dim = grid.dim();
    let k = k as isize;
    let mut out = mask.clone();
    for t in 0..mask.n_time() {
        let s = mask.slice(t);
        for p in 0..grid.n_space() {
            let idx = grid.multi_index(p);
            let span = |d: usize| -> (usize, usize) {
                if d >= dim {
                    return (0, 0);
                }
                let lo = (idx[d] as isize - k).max(0) as usize;
                let hi = ((idx[d] as isize + k) as usize).min(shape[d] - 1);
                (lo, hi)
            };
            let (lo0, hi0) = span(0);
            let (lo1, hi1) = span(1);
            let mut any = false;
            let mut all = true;
            for j in lo1..=hi1 {
                for i in lo0..=hi0 {
                    let q = grid.node_index([i, j]);
                    any |= s[q];
                    all &= s[q];
                }
            }
            out.set(t, p, if dilate { any } else { all });
        }
    }
    out
}

/// A rule deciding when a player stops along a trajectory.
#[derive(Clone, Debug)]
pub enum StoppingRule {
    /// First time (t ≥ 0) the path is in the region.
    Region(PolicyRegion),
    /// Stop once the elapsed time reaches the given value.
    FixedTime(f64),
    Never,
    Immediate,
}

impl StoppingRule {
    /// Index of the first trajectory point where the rule fires.
    pub fn hitting_index(&self, grid: &SpaceTimeGrid, traj: &Trajectory) -> Option<usize> {
        match self {
            StoppingRule::Immediate => Some(0),
            StoppingRule::Never => None,
            StoppingRule::FixedTime(theta) => traj.elapsed.iter().position(|&e| e >= theta - 1e-12),
            StoppingRule::Region(r) => traj.located.iter().position(|l| r.contains_located(grid, l)),
        }
    }
}

/// Fields entering a payoff. `data` is the value paid when no rule fires
/// before the horizon or the box exit, matching the solver's terminal and
/// boundary data.
#[derive(Clone, Copy, Debug)]
pub struct PayoffFields<'a> {
    pub g: &'a ScalarField,
    pub h: Option<&'a ScalarField>,
    pub f: Option<&'a ScalarField>,
    pub data: &'a ScalarField,
}

struct PathPayoff<'a> {
    grid: &'a SpaceTimeGrid,
    alpha: f64,
    fields: PayoffFields<'a>,
}

impl PathPayoff<'_> {
    /// Discounted running reward collected up to index `end` (trapezoid).
    fn running(&self, traj: &Trajectory, end: usize) -> f64 {
        self.fields.f.map_or(0.0, |f| running_integral(f, self.grid, self.alpha, traj, end))
    }

    fn discounted(&self, field: &ScalarField, traj: &Trajectory, j: usize) -> f64 {
        (-self.alpha * traj.elapsed[j]).exp() * value_at(field, self.grid, &traj.located[j])
    }

    /// Stopping payoff for the first-fire index `sigma`; truncated paths pay
    /// `data` at their last point.
    fn stopping(&self, traj: &Trajectory, sigma: Option<usize>) -> (f64, bool) {
        let last = traj.len() - 1;
        match sigma {
            Some(j) => (self.running(traj, j) + self.discounted(self.fields.g, traj, j), false),
            None => (self.running(traj, last) + self.discounted(self.fields.data, traj, last), true),
        }
    }

    /// Game payoff: `τ ≤ σ` pays `h`, otherwise `g`.
    fn game(&self, traj: &Trajectory, sigma: Option<usize>, tau: Option<usize>) -> (f64, bool) {
        let h = self.fields.h.expect("game payoff needs h");
        match (sigma, tau) {
            (_, Some(t)) if sigma.is_none_or(|s| t <= s) => (self.running(traj, t) + self.discounted(h, traj, t), false),
            (Some(s), _) => (self.running(traj, s) + self.discounted(self.fields.g, traj, s), false),
            (None, None) => self.stopping(traj, None),
            _ => unreachable!(),
        }
    }
}

fn running_integral(f: &ScalarField, grid: &SpaceTimeGrid, alpha: f64, traj: &Trajectory, end: usize) -> f64 {
    let mut acc = 0.0;
    let mut prev = f64::NAN;
    for j in 0..=end {
        let cur = (-alpha * traj.elapsed[j]).exp() * value_at(f, grid, &traj.located[j]);
        if j > 0 {
            acc += 0.5 * (prev + cur) * (traj.elapsed[j] - traj.elapsed[j - 1]);
        }
        prev = cur;
    }
    acc
}

/// Prefix sums of [`running_integral`] at every trajectory index.
fn running_cumulative(f: &ScalarField, grid: &SpaceTimeGrid, alpha: f64, traj: &Trajectory) -> Vec<f64> {
    let mut out = vec![0.0; traj.len()];
    let mut prev = (-alpha * traj.elapsed[0]).exp() * value_at(f, grid, &traj.located[0]);
    for j in 1..traj.len() {
        let cur = (-alpha * traj.elapsed[j]).exp() * value_at(f, grid, &traj.located[j]);
        out[j] = out[j - 1] + 0.5 * (prev + cur) * (traj.elapsed[j] - traj.elapsed[j - 1]);
        prev = cur;
    }
    out
}

fn check_fields(grid: &SpaceTimeGrid, fields: &PayoffFields) -> Result<()> {
    fields.g.check_shape(grid)?;
    fields.data.check_shape(grid)?;
    for f in [fields.h, fields.f].into_iter().flatten() {
        f.check_shape(grid)?;
    }
    Ok(())
}

/// `J_z(σ)` for each rule, on common random numbers.
pub fn evaluate_stopping_rules(
    sim: &PathSimulator,
    start: &StartPoint,
    fields: PayoffFields,
    rules: &[StoppingRule],
) -> Result<SampleSet> {
    check_fields(sim.grid(), &fields)?;
    let pay = PathPayoff {
        grid: sim.grid(),
        alpha: sim.model().alpha(),
        fields,
    };
    sim.sample(start, rules.len(), |traj, out, trunc| {
        for (i, rule) in rules.iter().enumerate() {
            let (v, t) = pay.stopping(traj, rule.hitting_index(pay.grid, traj));
            out[i] = v;
            trunc[i] = t;
        }
    })
}

/// `J_z(σ)` for a single rule.
pub fn evaluate_stopping_value(
    sim: &PathSimulator,
    start: &StartPoint,
    fields: PayoffFields,
    rule: &StoppingRule,
) -> Result<MCEstimate> {
    Ok(evaluate_stopping_rules(sim, start, fields, std::slice::from_ref(rule))?.estimate(0))
}

/// `J_z(τ, σ)` for each `(σ, τ)` pair, on common random numbers.
pub fn evaluate_game_pairs(
    sim: &PathSimulator,
    start: &StartPoint,
    fields: PayoffFields,
    pairs: &[(StoppingRule, StoppingRule)],
) -> Result<SampleSet> {
    check_fields(sim.grid(), &fields)?;
    if fields.h.is_none() {
        return Err(Error::Simulation("game payoff needs an upper obstacle".into()));
    }
    let pay = PathPayoff {
        grid: sim.grid(),
        alpha: sim.model().alpha(),
        fields,
    };
    sim.sample(start, pairs.len(), |traj, out, trunc| {
        for (i, (sigma, tau)) in pairs.iter().enumerate() {
            let s = sigma.hitting_index(pay.grid, traj);
            let t = tau.hitting_index(pay.grid, traj);
            let (v, tr) = pay.game(traj, s, t);
            out[i] = v;
            trunc[i] = tr;
        }
    })
}

pub fn evaluate_game_payoff(
    sim: &PathSimulator,
    start: &StartPoint,
    fields: PayoffFields,
    sigma: &StoppingRule,
    tau: &StoppingRule,
) -> Result<MCEstimate> {
    Ok(evaluate_game_pairs(sim, start, fields, &[(sigma.clone(), tau.clone())])?.estimate(0))
}

/// Named variations of a stopping region: dilations and erosions by 1 to 3
/// cells, fixed-time rules at quarters of the remaining horizon, and the
/// trivial rules.
pub fn perturbation_family(region: &PolicyRegion, grid: &SpaceTimeGrid, start: &StartPoint) -> Vec<(String, StoppingRule)> {
    let mut out = Vec::new();
    for k in 1..=3 {
        out.push((format!("dilate_{k}"), StoppingRule::Region(region.dilate(grid, k))));
        out.push((format!("erode_{k}"), StoppingRule::Region(region.erode(grid, k))));
    }
    let horizon = grid.t_max() - start.s;
    for q in [1, 2, 3] {
        let theta = 0.25 * q as f64 * horizon;
        out.push((format!("fixed_{theta:.3}"), StoppingRule::FixedTime(theta)));
    }
    out.push(("never".into(), StoppingRule::Never));
    out.push(("immediate".into(), StoppingRule::Immediate));
    out
}

/// One inequality tested by a report: `lhs − rhs ≤ bound`.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub label: String,
    pub estimate: MCEstimate,
    /// Mean and standard error of `lhs − rhs` (common random numbers).
    pub diff_mean: f64,
    pub diff_stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

impl InequalityCheck {
    fn new(label: String, estimate: MCEstimate, diff: MCEstimate, scheme_tol: f64) -> Self {
        let bound = 3.0 * diff.stderr + scheme_tol;
        Self {
            label,
            estimate,
            diff_mean: diff.mean,
            diff_stderr: diff.stderr,
            bound,
            pass: diff.mean <= bound,
        }
    }
}

/// Comparison of an MC estimate with a solver value.
#[derive(Clone, Debug, Serialize)]
pub struct ValueMatch {
    pub start: StartPoint,
    pub solver_value: f64,
    pub estimate: MCEstimate,
    pub bound: f64,
    pub pass: bool,
}

impl ValueMatch {
    pub fn new(start: StartPoint, solver_value: f64, estimate: MCEstimate, scheme_tol: f64) -> Self {
        let bound = 3.0 * estimate.stderr + scheme_tol;
        Self {
            start,
            solver_value,
            estimate,
            bound,
            pass: (estimate.mean - solver_value).abs() <= bound,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StoppingReport {
    pub value_match: ValueMatch,
    /// `J_z(σ) ≤ value(z)` for every perturbed rule.
    pub suboptimality: Vec<InequalityCheck>,
    pub pass: bool,
}

/// Evaluates the contact-region rule and its perturbations at `start` and
/// compares both against the solver value.
pub fn check_stopping(
    sim: &PathSimulator,
    start: &StartPoint,
    fields: PayoffFields,
    value: &ScalarField,
    contact: &PolicyRegion,
) -> Result<StoppingReport> {
    let grid = sim.grid();
    let tol = sim.config().scheme_tol(grid);
    let v0 = value.interpolate(grid, start.s, &start.x[..grid.dim()]);
    let family = perturbation_family(contact, grid, start);
    let mut rules = vec![StoppingRule::Region(contact.clone())];
    rules.extend(family.iter().map(|(_, r)| r.clone()));
    let samples = evaluate_stopping_rules(sim, start, fields, &rules)?;
    let value_match = ValueMatch::new(*start, v0, samples.estimate(0), tol);
    let suboptimality: Vec<InequalityCheck> = family
        .iter()
        .enumerate()
        .map(|(i, (label, _))| {
            let est = samples.estimate(i + 1);
            // the solver value is deterministic, so the difference has the
            // estimate's standard error
            let diff = MCEstimate {
                mean: est.mean - v0,
                ..est
            };
            InequalityCheck::new(label.clone(), est, diff, tol)
        })
        .collect();
    let pass = value_match.pass && suboptimality.iter().all(|c| c.pass);
    Ok(StoppingReport {
        value_match,
        suboptimality,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SaddleReport {
    pub value_match: ValueMatch,
    /// `J(τ̂, σ) ≤ J(τ̂, σ̂)` for perturbed σ.
    pub sigma_side: Vec<InequalityCheck>,
    /// `J(τ̂, σ̂) ≤ J(τ, σ̂)` for perturbed τ.
    pub tau_side: Vec<InequalityCheck>,
    pub pass: bool,
}

/// Tests both saddle inequalities for the game regions against perturbed
/// rules of either player, on common random numbers.
pub fn check_saddle(
    sim: &PathSimulator,
    start: &StartPoint,
    fields: PayoffFields,
    w_bar: &ScalarField,
    sigma_region: &PolicyRegion,
    tau_region: &PolicyRegion,
) -> Result<SaddleReport> {
    let grid = sim.grid();
    let tol = sim.config().scheme_tol(grid);
    let w0 = w_bar.interpolate(grid, start.s, &start.x[..grid.dim()]);
    let sigma_hat = StoppingRule::Region(sigma_region.clone());
    let tau_hat = StoppingRule::Region(tau_region.clone());
    let sig_family = perturbation_family(sigma_region, grid, start);
    let tau_family = perturbation_family(tau_region, grid, start);
    let mut pairs = vec![(sigma_hat.clone(), tau_hat.clone())];
    pairs.extend(sig_family.iter().map(|(_, s)| (s.clone(), tau_hat.clone())));
    pairs.extend(tau_family.iter().map(|(_, t)| (sigma_hat.clone(), t.clone())));
    let samples = evaluate_game_pairs(sim, start, fields, &pairs)?;
    let value_match = ValueMatch::new(*start, w0, samples.estimate(0), tol);
    let ns = sig_family.len();
    let sigma_side: Vec<InequalityCheck> = sig_family
        .iter()
        .enumerate()
        .map(|(i, (label, _))| InequalityCheck::new(format!("sigma_{label}"), samples.estimate(1 + i), samples.difference(1 + i, 0), tol))
        .collect();
    let tau_side: Vec<InequalityCheck> = tau_family
        .iter()
        .enumerate()
        .map(|(i, (label, _))| {
            InequalityCheck::new(format!("tau_{label}"), samples.estimate(1 + ns + i), samples.difference(0, 1 + ns + i), tol)
        })
        .collect();
    let pass = value_match.pass && sigma_side.iter().chain(&tau_side).all(|c| c.pass);
    Ok(SaddleReport {
        value_match,
        sigma_side,
        tau_side,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SupermartingaleReport {
    pub checkpoints: Vec<f64>,
    /// `Ê[e^{−αt}·v(Z_t)]` at each checkpoint, for the process stopped at
    /// the box exit.
    pub means: Vec<MCEstimate>,
    /// `E_{k+1} − E_k ≤ bound` for consecutive checkpoints.
    pub steps: Vec<InequalityCheck>,
    /// `|Ê[e^{−α(t∧σ)} v(Z_{t∧σ})] − v(z)| ≤ bound`, with σ the first entry
    /// into the contact region; present when a region is given.
    pub martingale: Vec<ValueMatch>,
    pub pass: bool,
}

/// Checks that `e^{−αt} v(Z_t)`, plus the discounted reward `running`
/// collected so far when given, has nonincreasing mean across `checkpoints`
/// (elapsed times, increasing, starting anywhere in the window) and, when
/// `contact` is given, that the process stopped at the first contact has
/// constant mean `v(z)`.
pub fn check_supermartingale(
    sim: &PathSimulator,
    start: &StartPoint,
    value: &ScalarField,
    running: Option<&ScalarField>,
    checkpoints: &[f64],
    contact: Option<&PolicyRegion>,
) -> Result<SupermartingaleReport> {
    let grid = sim.grid();
    value.check_shape(grid)?;
    if let Some(f) = running {
        f.check_shape(grid)?;
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Simulation("checkpoints must be nonempty and increasing".into()));
    }
    if checkpoints[0] < 0.0 || *checkpoints.last().unwrap() > grid.t_max() - start.s + 1e-12 {
        return Err(Error::Simulation("checkpoints must lie within the remaining horizon".into()));
    }
    let tol = sim.config().scheme_tol(grid);
    let alpha = sim.model().alpha();
    let n = checkpoints.len();
    let n_out = if contact.is_some() { 2 * n } else { n };
    let samples = sim.sample(start, n_out, |traj, out, trunc| {
        let first_contact = contact.and_then(|r| traj.located.iter().position(|l| r.contains_located(grid, l)));
        let acc = running.map(|f| running_cumulative(f, grid, alpha, traj));
        let at = |j: usize| {
            (-alpha * traj.elapsed[j]).exp() * value_at(value, grid, &traj.located[j]) + acc.as_ref().map_or(0.0, |a| a[j])
        };
        for (c, &t) in checkpoints.iter().enumerate() {
            let j = traj.index_at(t);
            out[c] = at(j);
            trunc[c] = traj.exited && j == traj.len() - 1;
            if contact.is_some() {
                out[n + c] = at(first_contact.map_or(j, |s| s.min(j)));
            }
        }
    })?;
    let means: Vec<MCEstimate> = (0..n).map(|c| samples.estimate(c)).collect();
    let steps: Vec<InequalityCheck> = (1..n)
        .map(|c| {
            InequalityCheck::new(
                format!("t{:.4}_vs_t{:.4}", checkpoints[c], checkpoints[c - 1]),
                samples.estimate(c),
                samples.difference(c, c - 1),
                tol,
            )
        })
        .collect();
    let v0 = value.interpolate(grid, start.s, &start.x[..grid.dim()]);
    let martingale: Vec<ValueMatch> = if contact.is_some() {
        (0..n).map(|c| ValueMatch::new(*start, v0, samples.estimate(n + c), tol)).collect()
    } else {
        Vec::new()
    };
    let pass = steps.iter().all(|c| c.pass) && martingale.iter().all(|m| m.pass);
    Ok(SupermartingaleReport {
        checkpoints: checkpoints.to_vec(),
        means,
        steps,
        martingale,
        pass,
    })
}

/// Martingale part of [`check_supermartingale`] alone: the mean of
/// `e^{−α(t∧σ)} v(Z_{t∧σ})` plus the running reward up to `t∧σ`, with σ the first entry into `region`, must
/// equal `v(z)` at every checkpoint. Used for game values, which are not
/// excessive but are martingales until either player's region is reached.
pub fn check_martingale(
    sim: &PathSimulator,
    start: &StartPoint,
    value: &ScalarField,
    running: Option<&ScalarField>,
    checkpoints: &[f64],
    region: &PolicyRegion,
) -> Result<Vec<ValueMatch>> {
    let grid = sim.grid();
    value.check_shape(grid)?;
    if let Some(f) = running {
        f.check_shape(grid)?;
    }
    let tol = sim.config().scheme_tol(grid);
    let alpha = sim.model().alpha();
    let samples = sim.sample(start, checkpoints.len(), |traj, out, _| {
        let first = traj.located.iter().position(|l| region.contains_located(grid, l));
        let acc = running.map(|f| running_cumulative(f, grid, alpha, traj));
        for (c, &t) in checkpoints.iter().enumerate() {
            let j = first.map_or(traj.index_at(t), |s| s.min(traj.index_at(t)));
            out[c] = (-alpha * traj.elapsed[j]).exp() * value_at(value, grid, &traj.located[j])
                + acc.as_ref().map_or(0.0, |a| a[j]);
        }
    })?;
    let v0 = value.interpolate(grid, start.s, &start.x[..grid.dim()]);
    Ok((0..checkpoints.len())
        .map(|c| ValueMatch::new(*start, v0, samples.estimate(c), tol))
        .collect())
}
