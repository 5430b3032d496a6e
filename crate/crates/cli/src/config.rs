//! JSON problem configuration.

use std::path::{Path, PathBuf};

use dynkin_core::game::GameConfig;
use dynkin_core::mc::{MCConfig, StartPoint};
use dynkin_core::obstacle::PenaltyConfig;
use dynkin_core::{Axis, DensityMode, DiffusionModel, DiffusionSpec, DriftSpec, ScalarField, SpaceTimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub game: GameSettings,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub alpha: f64,
    pub density_mode: DensityMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_max: f64,
    pub t_steps: usize,
    pub axes: Vec<AxisConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

/// Analytic families for obstacles and running rewards. `x` below is the
/// state, `w · x` a weighted sum of its coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `(strike − w · x)⁺`
    Put {
        strike: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// `(w · x − strike)⁺`
    Call {
        strike: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// `offset + slope · x + time_slope · t`
    Affine {
        offset: f64,
        slope: Vec<f64>,
        #[serde(default)]
        time_slope: f64,
    },
    /// `amplitude · exp(−½ Σ ((x_i − center_i)/width_i)²)`
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: Vec<f64>,
    },
    Sum {
        terms: Vec<FieldSpec>,
    },
}

impl FieldSpec {
    fn validate(&self, dim: usize, key: &str) -> Result<(), CliError> {
        let len = |name: &str, v: &[f64]| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(CliError::config(format!("{key}.{name} has length {}, expected {dim}", v.len())))
            }
        };
        match self {
            FieldSpec::Constant { .. } => Ok(()),
            FieldSpec::Put { weights, .. } | FieldSpec::Call { weights, .. } => {
                weights.as_deref().map_or(Ok(()), |w| len("weights", w))
            }
            FieldSpec::Affine { slope, .. } => len("slope", slope),
            FieldSpec::GaussianBump { center, width, .. } => {
                len("center", center)?;
                len("width", width)?;
                if width.iter().any(|&w| w.is_nan() || w <= 0.0) {
                    return Err(CliError::config(format!("{key}.width must be positive")));
                }
                Ok(())
            }
            FieldSpec::Sum { terms } => terms
                .iter()
                .enumerate()
                .try_for_each(|(i, t)| t.validate(dim, &format!("{key}.terms[{i}]"))),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let dot = |w: &Option<Vec<f64>>| match w {
            Some(w) => w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            None => x.iter().sum::<f64>() / x.len() as f64,
        };
        match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Put { strike, weights } => (strike - dot(weights)).max(0.0),
            FieldSpec::Call { strike, weights } => (dot(weights) - strike).max(0.0),
            FieldSpec::Affine {
                offset,
                slope,
                time_slope,
            } => offset + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + time_slope * t,
            FieldSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let e: f64 = x
                    .iter()
                    .zip(center)
                    .zip(width)
                    .map(|((xi, c), w)| ((xi - c) / w).powi(2))
                    .sum();
                amplitude * (-0.5 * e).exp()
            }
            FieldSpec::Sum { terms } => terms.iter().map(|f| f.eval(t, x)).sum(),
        }
    }

    pub fn to_field(&self, grid: &SpaceTimeGrid) -> ScalarField {
        ScalarField::from_fn(grid, |t, x| self.eval(t, x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Witness {
    pub v1: FieldSpec,
    pub v2: FieldSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMethod {
    /// Solve for `g − R_α f` and add `R_α f` back.
    #[default]
    Reduction,
    /// Penalized equation with `f` as a source term.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Stopping {
        g: FieldSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<FieldSpec>,
        #[serde(default)]
        cost_method: CostMethod,
    },
    Game {
        g: FieldSpec,
        h: FieldSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<FieldSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<Witness>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSettings {
    pub outer_tol: f64,
    pub max_outer_iters: usize,
}

impl Default for GameSettings {
    fn default() -> Self {
        let d = GameConfig::default();
        Self {
            outer_tol: d.outer_tol,
            max_outer_iters: d.max_outer_iters,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub n_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub seed: u64,
    pub antithetic: bool,
    pub scheme_tol_factor: f64,
    /// Start points `(s, x)` for the cross-validation checks.
    pub start_points: Vec<StartPointConfig>,
    /// Elapsed times for the supermartingale checks; empty means quarters
    /// of the remaining horizon.
    pub checkpoints: Vec<f64>,
}

impl Default for McSettings {
    fn default() -> Self {
        let d = MCConfig::default();
        Self {
            n_paths: d.n_paths,
            dt: d.dt,
            seed: d.seed,
            antithetic: d.antithetic,
            scheme_tol_factor: d.scheme_tol_factor,
            start_points: Vec::new(),
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPointConfig {
    pub s: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ProblemConfig {
    /// Parses and validates a config; errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical pretty-printed JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "schema_version: unsupported version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        let dim = self.model.dim;
        if self.grid.axes.len() != dim {
            return Err(CliError::config(format!(
                "grid.axes has {} entries, model.dim is {dim}",
                self.grid.axes.len()
            )));
        }
        match &self.problem {
            ProblemSpec::Stopping { g, f, .. } => {
                g.validate(dim, "problem.g")?;
                if let Some(f) = f {
                    f.validate(dim, "problem.f")?;
                }
            }
            ProblemSpec::Game { g, h, f, witness } => {
                g.validate(dim, "problem.g")?;
                h.validate(dim, "problem.h")?;
                if let Some(f) = f {
                    f.validate(dim, "problem.f")?;
                }
                if let Some(w) = witness {
                    w.v1.validate(dim, "problem.witness.v1")?;
                    w.v2.validate(dim, "problem.witness.v2")?;
                }
            }
        }
        self.penalty
            .validate()
            .map_err(|e| CliError::config(format!("penalty: {e}")))?;
        self.game_config()
            .validate()
            .map_err(|e| CliError::config(format!("game: {e}")))?;
        self.mc_config()
            .validate()
            .map_err(|e| CliError::config(format!("mc: {e}")))?;
        for (i, p) in self.mc.start_points.iter().enumerate() {
            if p.x.len() != dim {
                return Err(CliError::config(format!("mc.start_points[{i}].x has length {}, expected {dim}", p.x.len())));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<DiffusionModel, CliError> {
        let m = &self.model;
        let mut model = DiffusionModel::new(m.dim, m.drift.clone(), m.diffusion.clone(), m.alpha, m.density_mode.clone())
            .map_err(|e| CliError::config(format!("model: {e}")))?;
        if let Some(l) = m.lambda_min {
            model = model.with_lambda_min(l);
        }
        Ok(model)
    }

    pub fn build_grid(&self) -> Result<SpaceTimeGrid, CliError> {
        let axes = self
            .grid
            .axes
            .iter()
            .enumerate()
            .map(|(i, a)| Axis::uniform(a.min, a.max, a.nodes).map_err(|e| CliError::config(format!("grid.axes[{i}]: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        SpaceTimeGrid::uniform(self.grid.t_max, self.grid.t_steps, axes).map_err(|e| CliError::config(format!("grid: {e}")))
    }

    pub fn game_config(&self) -> GameConfig {
        GameConfig {
            outer_tol: self.game.outer_tol,
            max_outer_iters: self.game.max_outer_iters,
            penalty: self.penalty.clone(),
        }
    }

    pub fn mc_config(&self) -> MCConfig {
        MCConfig {
            n_paths: self.mc.n_paths,
            dt: self.mc.dt,
            seed: self.mc.seed,
            antithetic: self.mc.antithetic,
            scheme_tol_factor: self.mc.scheme_tol_factor,
            ..MCConfig::default()
        }
    }

    pub fn start_points(&self) -> Vec<StartPoint> {
        self.mc.start_points.iter().map(|p| StartPoint::new(p.s, &p.x)).collect()
    }
}
