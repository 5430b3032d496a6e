//! The four subcommands. Each writes its artifacts under the output
//! directory and returns a JSON summary; failed checks are reported in the
//! summary rather than as errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dynkin_core::game::{
    boundary_data, double_obstacle_oracle, double_obstacle_residual, solve_game_with_cost, GameDiagnostics, GameProblem,
    GameSolution, IterationRecord,
};
use dynkin_core::linalg::RelaxationConfig;
use dynkin_core::mc::{
    check_martingale, check_saddle, check_stopping, check_supermartingale, PathSimulator, PayoffFields, PolicyRegion,
    SaddleReport, StartPoint, StoppingReport, SupermartingaleReport, ValueMatch,
};
use dynkin_core::obstacle::{
    cost_data, obstacle_oracle, obstacle_oracle_with_source, solve_obstacle, solve_obstacle_with_cost,
    solve_obstacle_with_source, stopping_data, vi_residual_check, RelaxationStart, SolveDiagnostics, VISolution,
};
use dynkin_core::{forms::resolvent_apply, Discretization, Mask, ScalarField, SpaceTimeGrid};
use serde::Serialize;
use serde_json::Value;

use crate::config::{CostMethod, ProblemConfig, ProblemSpec, SCHEMA_VERSION};
use crate::error::CliError;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const VERIFY_FILE: &str = "verify.json";
pub const ORACLE_FILE: &str = "oracle.json";
pub const REPORT_FILE: &str = "report.json";

const STOPPING_FIELDS: [&str; 2] = ["value", "contact"];
const GAME_FIELDS: [&str; 5] = ["w_bar", "phi_bar", "psi_bar", "sigma_region", "tau_region"];

/// Oracle agreement required by `compare-oracle`.
pub const ORACLE_TOL: f64 = 1e-6;
/// Agreement required between the direct and reduced holding-cost solves.
pub const COST_METHOD_TOL: f64 = 1e-8;
/// Trial count for the variational-inequality residual in diagnostics.
const VI_TRIALS: usize = 100;

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ProblemConfig) -> Result<(), CliError> {
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
        }
        if let Some(n) = self.paths {
            cfg.mc.n_paths = n;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        cfg.validate()
    }
}

/// The discretized problem with its data fields evaluated on the grid.
pub struct Prepared {
    pub cfg: ProblemConfig,
    pub disc: Discretization,
    pub g: ScalarField,
    pub h: Option<ScalarField>,
    pub f: Option<ScalarField>,
    pub game: Option<GameProblem>,
}

impl Prepared {
    pub fn new(cfg: ProblemConfig) -> Result<Self, CliError> {
        let model = cfg.build_model()?;
        let grid = cfg.build_grid()?;
        let disc = Discretization::new(model, grid)?;
        let grid = disc.grid();
        let (g, h, f, game) = match &cfg.problem {
            ProblemSpec::Stopping { g, f, .. } => (g.to_field(grid), None, f.as_ref().map(|f| f.to_field(grid)), None),
            ProblemSpec::Game { g, h, f, witness } => {
                let (g, h) = (g.to_field(grid), h.to_field(grid));
                let f = f.as_ref().map(|f| f.to_field(grid));
                let w = witness.as_ref().map(|w| (w.v1.to_field(grid), w.v2.to_field(grid)));
                let prob = GameProblem::new(&disc, g.clone(), h.clone(), f.clone(), w)?;
                (g, Some(h), f, Some(prob))
            }
        };
        Ok(Self {
            cfg,
            disc,
            g,
            h,
            f,
            game,
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.disc.grid()
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.output.dir
    }

    fn kind(&self) -> &'static str {
        if self.game.is_some() {
            "game"
        } else {
            "stopping"
        }
    }

    /// Value paid by the MC harness at truncation or box exit.
    fn payoff_data(&self) -> Result<ScalarField, CliError> {
        Ok(match (&self.game, &self.f) {
            (Some(p), _) => boundary_data(&self.disc, p)?,
            (None, Some(f)) => cost_data(&self.g, &resolvent_apply(&self.disc, f)?),
            (None, None) => stopping_data(&self.g),
        })
    }

    fn cost_method(&self) -> CostMethod {
        match &self.cfg.problem {
            ProblemSpec::Stopping { cost_method, .. } => *cost_method,
            ProblemSpec::Game { .. } => CostMethod::Reduction,
        }
    }

    pub fn solve_stopping(&self) -> Result<VISolution, CliError> {
        let p = &self.cfg.penalty;
        Ok(match (&self.f, self.cost_method()) {
            (None, _) => solve_obstacle(&self.disc, &self.g, p)?,
            (Some(f), CostMethod::Reduction) => solve_obstacle_with_cost(&self.disc, &self.g, f, p)?,
            (Some(f), CostMethod::Direct) => solve_obstacle_with_source(&self.disc, &self.g, f, p)?,
        })
    }

    pub fn solve_game(&self) -> Result<GameSolution, CliError> {
        let prob = self.game.as_ref().ok_or_else(|| CliError::config("problem.kind is not game"))?;
        Ok(solve_game_with_cost(&self.disc, prob, &self.cfg.game_config())?)
    }

    pub fn solve(&self) -> Result<Solved, CliError> {
        if self.game.is_some() {
            Ok(Solved::Game(self.solve_game()?))
        } else {
            Ok(Solved::Stopping(self.solve_stopping()?))
        }
    }
}

pub enum Solved {
    Stopping(VISolution),
    Game(GameSolution),
}

fn mask_field(grid: &SpaceTimeGrid, m: &Mask) -> ScalarField {
    let vals: Vec<f64> = (0..m.n_time())
        .flat_map(|k| m.slice(k).iter().map(|&b| if b { 1.0 } else { 0.0 }))
        .collect();
    ScalarField::from_values(grid, vals).expect("mask matches grid")
}

fn write_field(dir: &Path, name: &str, grid: &SpaceTimeGrid, field: &ScalarField) -> Result<(), CliError> {
    let path = dir.join(format!("{name}.csv"));
    let mut w = BufWriter::new(File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
    field.write_csv(grid, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field`], checking that its coordinates
/// match the grid.
fn read_field(dir: &Path, name: &str, grid: &SpaceTimeGrid) -> Result<ScalarField, CliError> {
    let path = dir.join(format!("{name}.csv"));
    if !path.exists() {
        return Err(CliError::MissingArtifacts(format!("missing artifact {}", path.display())));
    }
    let bad = |msg: String| CliError::MissingArtifacts(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| bad(e.to_string()))?;
    let dim = grid.dim();
    let n = grid.n_time() * grid.n_space();
    let mut values = Vec::with_capacity(n);
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != dim + 2 {
            return Err(bad(format!("row {row} has {} columns, expected {}", rec.len(), dim + 2)));
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {row}: {e}")))?;
        if row >= n {
            return Err(bad(format!("more than {n} rows")));
        }
        let (k, node) = (row / grid.n_space(), row % grid.n_space());
        let p = grid.point(node);
        let expected_t = grid.t_nodes()[k];
        let scale = 1.0 + expected_t.abs();
        if (nums[0] - expected_t).abs() > 1e-12 * scale
            || (0..dim).any(|d| (nums[1 + d] - p[d]).abs() > 1e-12 * (1.0 + p[d].abs()))
        {
            return Err(bad(format!("row {row} does not match the configured grid")));
        }
        values.push(nums[dim + 1]);
    }
    if values.len() != n {
        return Err(bad(format!("{} rows, expected {n}", values.len())));
    }
    Ok(ScalarField::from_values(grid, values)?)
}

fn read_mask(dir: &Path, name: &str, grid: &SpaceTimeGrid) -> Result<Mask, CliError> {
    let f = read_field(dir, name, grid)?;
    Ok(Mask::from_fn(&f, |k, i| f.get(k, i) >= 0.5))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct GridSummary {
    t_max: f64,
    t_steps: usize,
    dt: f64,
    dx: f64,
    nodes: Vec<usize>,
}

impl GridSummary {
    fn of(grid: &SpaceTimeGrid) -> Self {
        Self {
            t_max: grid.t_max(),
            t_steps: grid.n_time() - 1,
            dt: grid.max_dt(),
            dx: grid.max_dx(),
            nodes: grid.axes().iter().map(|a| a.len()).collect(),
        }
    }
}

#[derive(Serialize)]
struct StoppingDiagnostics {
    cost_method: Option<CostMethod>,
    #[serde(flatten)]
    solve: SolveDiagnostics,
    vi_residual_check: f64,
    value_minus_obstacle_min: f64,
}

#[derive(Serialize)]
struct GameDiagnosticsReport {
    #[serde(flatten)]
    game: GameDiagnostics,
    history: Vec<IterationRecord>,
    double_obstacle_residual: f64,
}

#[derive(Serialize)]
struct DiagnosticsFile<T: Serialize> {
    schema_version: u32,
    name: String,
    kind: &'static str,
    grid: GridSummary,
    artifacts: Vec<String>,
    diagnostics: T,
}

/// `solve`: writes the value fields as CSV and the solver diagnostics.
pub fn run_solve(prep: &Prepared) -> Result<Value, CliError> {
    let dir = prep.out_dir();
    create_dir(dir)?;
    let grid = prep.grid();
    let solved = prep.solve()?;
    let path = dir.join(DIAGNOSTICS_FILE);
    let base = |artifacts: &[&str]| -> (u32, String, GridSummary, Vec<String>) {
        (
            SCHEMA_VERSION,
            prep.cfg.name.clone(),
            GridSummary::of(grid),
            artifacts.iter().map(|a| format!("{a}.csv")).collect(),
        )
    };
    match solved {
        Solved::Stopping(sol) => {
            write_field(dir, "value", grid, &sol.value)?;
            write_field(dir, "contact", grid, &mask_field(grid, &sol.contact_mask))?;
            let vi = vi_residual_check(&prep.disc, &sol.value, &prep.g, prep.f.as_ref(), VI_TRIALS, prep.cfg.mc.seed);
            let (schema_version, name, grid_summary, artifacts) = base(&STOPPING_FIELDS);
            let file = DiagnosticsFile {
                schema_version,
                name,
                kind: "stopping",
                grid: grid_summary,
                artifacts,
                diagnostics: StoppingDiagnostics {
                    cost_method: prep.f.as_ref().map(|_| prep.cost_method()),
                    solve: sol.diagnostics(&prep.g),
                    vi_residual_check: vi,
                    value_minus_obstacle_min: sol.value.min_diff(&prep.g),
                },
            };
            write_json(&path, &file)?;
            Ok(serde_json::to_value(&file).expect("serializes"))
        }
        Solved::Game(sol) => {
            let prob = prep.game.as_ref().expect("game problem");
            write_field(dir, "w_bar", grid, &sol.w_bar)?;
            write_field(dir, "phi_bar", grid, &sol.phi_bar)?;
            write_field(dir, "psi_bar", grid, &sol.psi_bar)?;
            write_field(dir, "sigma_region", grid, &mask_field(grid, &sol.stop_region_sigma))?;
            write_field(dir, "tau_region", grid, &mask_field(grid, &sol.stop_region_tau))?;
            let h = prep.h.as_ref().expect("game has h");
            let (schema_version, name, grid_summary, artifacts) = base(&GAME_FIELDS);
            let file = DiagnosticsFile {
                schema_version,
                name,
                kind: "game",
                grid: grid_summary,
                artifacts,
                diagnostics: GameDiagnosticsReport {
                    game: sol.diagnostics(&prep.g, h),
                    history: sol.history.clone(),
                    double_obstacle_residual: double_obstacle_residual(&prep.disc, prob, &sol.w_bar)?,
                },
            };
            write_json(&path, &file)?;
            Ok(serde_json::to_value(&file).expect("serializes"))
        }
    }
}

/// Solver output needed by the MC checks, either computed in-run or read
/// back from CSV artifacts.
pub enum Fields {
    Stopping {
        value: ScalarField,
        contact: Mask,
    },
    Game {
        w_bar: ScalarField,
        phi_bar: ScalarField,
        psi_bar: ScalarField,
        sigma: Mask,
        tau: Mask,
    },
}

impl Fields {
    pub fn from_solution(s: Solved) -> Self {
        match s {
            Solved::Stopping(sol) => Fields::Stopping {
                value: sol.value,
                contact: sol.contact_mask,
            },
            Solved::Game(sol) => Fields::Game {
                w_bar: sol.w_bar,
                phi_bar: sol.phi_bar,
                psi_bar: sol.psi_bar,
                sigma: sol.stop_region_sigma,
                tau: sol.stop_region_tau,
            },
        }
    }

    pub fn from_artifacts(prep: &Prepared) -> Result<Self, CliError> {
        let dir = prep.out_dir();
        let grid = prep.grid();
        if prep.game.is_some() {
            Ok(Fields::Game {
                w_bar: read_field(dir, "w_bar", grid)?,
                phi_bar: read_field(dir, "phi_bar", grid)?,
                psi_bar: read_field(dir, "psi_bar", grid)?,
                sigma: read_mask(dir, "sigma_region", grid)?,
                tau: read_mask(dir, "tau_region", grid)?,
            })
        } else {
            Ok(Fields::Stopping {
                value: read_field(dir, "value", grid)?,
                contact: read_mask(dir, "contact", grid)?,
            })
        }
    }
}

#[derive(Serialize)]
pub struct NamedSupermartingale {
    pub field: &'static str,
    #[serde(flatten)]
    pub report: SupermartingaleReport,
}

#[derive(Serialize)]
pub struct PointReport {
    pub start: StartPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopping: Option<StoppingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saddle: Option<SaddleReport>,
    pub supermartingale: Vec<NamedSupermartingale>,
    /// Game value stopped at the first entry into either region.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub martingale: Vec<ValueMatch>,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct NegativeControl {
    /// Raw obstacle `g` used in place of the value field.
    pub reports: Vec<SupermartingaleReport>,
    /// Whether at least one start point flagged a violation, as expected.
    pub flagged: bool,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub name: String,
    pub kind: &'static str,
    pub seed: u64,
    pub n_paths: usize,
    pub antithetic: bool,
    pub mc_dt: f64,
    pub scheme_tol: f64,
    pub source: &'static str,
    pub points: Vec<PointReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_control: Option<NegativeControl>,
    pub pass: bool,
}

/// Start points from the config, or the box center at time 0.
fn start_points(prep: &Prepared) -> Vec<StartPoint> {
    let pts = prep.cfg.start_points();
    if !pts.is_empty() {
        return pts;
    }
    let x: Vec<f64> = prep.grid().axes().iter().map(|a| 0.5 * (a.min() + a.max())).collect();
    vec![StartPoint::new(0.0, &x)]
}

/// Checkpoints within the horizon remaining from `s`.
fn checkpoints(prep: &Prepared, s: f64) -> Vec<f64> {
    let remaining = prep.grid().t_max() - s;
    if prep.cfg.mc.checkpoints.is_empty() {
        return (0..=4).map(|i| remaining * i as f64 / 4.0).collect();
    }
    prep.cfg
        .mc
        .checkpoints
        .iter()
        .copied()
        .filter(|&c| c >= 0.0 && c <= remaining + 1e-12)
        .collect()
}

/// `verify`: MC cross-validation of the solver fields.
pub fn run_verify(prep: &Prepared, from_artifacts: bool, negative_control: bool) -> Result<VerifyReport, CliError> {
    let fields = if from_artifacts {
        Fields::from_artifacts(prep)?
    } else {
        Fields::from_solution(prep.solve()?)
    };
    verify_fields(prep, &fields, from_artifacts, negative_control)
}

pub fn verify_fields(
    prep: &Prepared,
    fields: &Fields,
    from_artifacts: bool,
    negative_control: bool,
) -> Result<VerifyReport, CliError> {
    let grid = prep.grid();
    let mc = prep.cfg.mc_config();
    let sim = PathSimulator::new(prep.disc.model(), grid, &mc)?;
    let data = prep.payoff_data()?;
    let payoff = PayoffFields {
        g: &prep.g,
        h: prep.h.as_ref(),
        f: prep.f.as_ref(),
        data: &data,
    };
    let mut points = Vec::new();
    let mut controls = Vec::new();
    for start in start_points(prep) {
        let cps = checkpoints(prep, start.s);
        let mut report = PointReport {
            start,
            stopping: None,
            saddle: None,
            supermartingale: Vec::new(),
            martingale: Vec::new(),
            pass: false,
        };
        match fields {
            Fields::Stopping { value, contact } => {
                let region = PolicyRegion::from_mask(contact.clone());
                report.stopping = Some(check_stopping(&sim, &start, payoff, value, &region)?);
                if cps.len() >= 2 {
                    report.supermartingale.push(NamedSupermartingale {
                        field: "value",
                        report: check_supermartingale(&sim, &start, value, prep.f.as_ref(), &cps, Some(&region))?,
                    });
                }
            }
            Fields::Game {
                w_bar,
                phi_bar,
                psi_bar,
                sigma,
                tau,
            } => {
                let sr = PolicyRegion::from_mask(sigma.clone());
                let tr = PolicyRegion::from_mask(tau.clone());
                report.saddle = Some(check_saddle(&sim, &start, payoff, w_bar, &sr, &tr)?);
                if cps.len() >= 2 {
                    // The game value itself is not excessive; its two
                    // potentials are. `phi_bar` carries the resolvent of the
                    // running reward, so it is checked together with it.
                    report.supermartingale.push(NamedSupermartingale {
                        field: "phi_bar",
                        report: check_supermartingale(&sim, &start, phi_bar, prep.f.as_ref(), &cps, None)?,
                    });
                    report.supermartingale.push(NamedSupermartingale {
                        field: "psi_bar",
                        report: check_supermartingale(&sim, &start, psi_bar, None, &cps, None)?,
                    });
                    let either = PolicyRegion::from_mask(sigma.or(tau));
                    report.martingale = check_martingale(&sim, &start, w_bar, prep.f.as_ref(), &cps, &either)?;
                }
            }
        }
        report.pass = report.stopping.as_ref().is_none_or(|r| r.pass)
            && report.saddle.as_ref().is_none_or(|r| r.pass)
            && report.supermartingale.iter().all(|s| s.report.pass)
            && report.martingale.iter().all(|m| m.pass);
        if negative_control && cps.len() >= 2 {
            controls.push(check_supermartingale(&sim, &start, &prep.g, prep.f.as_ref(), &cps, None)?);
        }
        points.push(report);
    }
    let negative_control = negative_control.then(|| NegativeControl {
        flagged: controls.iter().any(|r| !r.pass),
        reports: controls,
    });
    let pass = points.iter().all(|p| p.pass) && negative_control.as_ref().is_none_or(|n| n.flagged);
    let report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        name: prep.cfg.name.clone(),
        kind: prep.kind(),
        seed: mc.seed,
        n_paths: mc.n_paths,
        antithetic: mc.antithetic,
        mc_dt: sim.dt(),
        scheme_tol: mc.scheme_tol(grid),
        source: if from_artifacts { "artifacts" } else { "in_run" },
        points,
        negative_control,
        pass,
    };
    create_dir(prep.out_dir())?;
    write_json(&prep.out_dir().join(VERIFY_FILE), &report)?;
    Ok(report)
}

#[derive(Serialize)]
pub struct OracleComparison {
    pub label: String,
    pub max_abs_diff: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OracleComparison {
    fn new(label: &str, a: &ScalarField, b: &ScalarField, tol: f64) -> Self {
        let d = a.max_abs_diff(b);
        Self {
            label: label.into(),
            max_abs_diff: d,
            tol,
            pass: d <= tol,
        }
    }
}

#[derive(Serialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub name: String,
    pub kind: &'static str,
    pub comparisons: Vec<OracleComparison>,
    pub pass: bool,
}

/// `compare-oracle`: penalty or iteration solution against projected
/// relaxation on the same grid, plus direct vs reduced cost handling.
pub fn run_compare_oracle(prep: &Prepared) -> Result<OracleReport, CliError> {
    let relax = RelaxationConfig::default();
    let mut comparisons = Vec::new();
    match &prep.game {
        Some(prob) => {
            let sol = prep.solve_game()?;
            for (label, start) in [
                ("iteration_vs_relaxation_previous", RelaxationStart::Previous),
                ("iteration_vs_relaxation_upper", RelaxationStart::Upper),
            ] {
                let o = double_obstacle_oracle(&prep.disc, prob, start, &relax)?;
                comparisons.push(OracleComparison::new(label, &sol.w_bar, &o, ORACLE_TOL));
            }
        }
        None => match &prep.f {
            None => {
                let sol = solve_obstacle(&prep.disc, &prep.g, &prep.cfg.penalty)?;
                let o = obstacle_oracle(&prep.disc, &prep.g, &relax)?;
                comparisons.push(OracleComparison::new("penalty_vs_relaxation", &sol.value, &o, ORACLE_TOL));
            }
            Some(f) => {
                let direct = solve_obstacle_with_source(&prep.disc, &prep.g, f, &prep.cfg.penalty)?;
                let reduced = solve_obstacle_with_cost(&prep.disc, &prep.g, f, &prep.cfg.penalty)?;
                let o = obstacle_oracle_with_source(&prep.disc, &prep.g, f, &relax)?;
                comparisons.push(OracleComparison::new("direct_vs_relaxation", &direct.value, &o, ORACLE_TOL));
                comparisons.push(OracleComparison::new("reduced_vs_relaxation", &reduced.value, &o, ORACLE_TOL));
                comparisons.push(OracleComparison::new(
                    "direct_vs_reduced",
                    &direct.value,
                    &reduced.value,
                    COST_METHOD_TOL,
                ));
            }
        },
    }
    let pass = comparisons.iter().all(|c| c.pass);
    let report = OracleReport {
        schema_version: SCHEMA_VERSION,
        name: prep.cfg.name.clone(),
        kind: prep.kind(),
        comparisons,
        pass,
    };
    create_dir(prep.out_dir())?;
    write_json(&prep.out_dir().join(ORACLE_FILE), &report)?;
    Ok(report)
}

/// `report`: consolidates the JSON artifacts already in the output
/// directory. Solver diagnostics are required; verification and oracle
/// reports are included when present.
pub fn run_report(out_dir: &Path) -> Result<Value, CliError> {
    let read = |name: &str| -> Result<Option<Value>, CliError> {
        let path = out_dir.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::MissingArtifacts(format!("{} is not valid JSON: {e}", path.display())))
    };
    let diagnostics = read(DIAGNOSTICS_FILE)?.ok_or_else(|| {
        CliError::MissingArtifacts(format!(
            "missing artifact {}; run `solve` first",
            out_dir.join(DIAGNOSTICS_FILE).display()
        ))
    })?;
    let verify = read(VERIFY_FILE)?;
    let oracle = read(ORACLE_FILE)?;
    let status = |v: &Option<Value>| v.as_ref().and_then(|v| v.get("pass")).and_then(Value::as_bool);
    let checks: Vec<bool> = [status(&verify), status(&oracle)].into_iter().flatten().collect();
    let report = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "diagnostics": diagnostics,
        "verify": verify,
        "oracle": oracle,
        "verify_pass": status(&verify),
        "oracle_pass": status(&oracle),
        "pass": checks.iter().all(|&b| b),
    });
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}
