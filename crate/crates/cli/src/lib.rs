//! Batch front end for the `dynkin-core` solvers: loads a JSON problem
//! config, runs the solve, verification, oracle and report pipelines, and
//! writes CSV fields and JSON reports.

pub mod config;
pub mod error;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

pub use config::ProblemConfig;
pub use error::CliError;
use pipeline::{Overrides, Prepared};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DYNKIN_VI_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dynkin-vi", version, about = "Optimal stopping and Dynkin game solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and write value fields and diagnostics.
    Solve(CommonArgs),
    /// Cross-check the solution against Monte Carlo simulation.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Also run the supermartingale check on the raw obstacle, which is
        /// expected to be flagged.
        #[arg(long)]
        negative_control: bool,
        /// Read the fields written by an earlier `solve` instead of solving.
        #[arg(long)]
        from_artifacts: bool,
    },
    /// Compare the solver against the projected-relaxation oracle.
    CompareOracle(CommonArgs),
    /// Consolidate the JSON artifacts in the output directory.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override the Monte Carlo seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    fn prepare(&self) -> Result<Prepared, CliError> {
        let mut cfg = ProblemConfig::load(&self.config)?;
        Overrides {
            seed: self.seed,
            paths: self.paths,
            out: self.out.clone(),
        }
        .apply(&mut cfg)?;
        Prepared::new(cfg)
    }
}

/// Outcome of a successful run: a JSON summary for stdout and whether every
/// check in it passed.
pub struct Outcome {
    pub summary: Value,
    pub pass: bool,
}

/// Sizes the global rayon pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a second call in the same process finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Solve(args) => {
            let prep = args.prepare()?;
            let summary = pipeline::run_solve(&prep)?;
            Ok(Outcome { summary, pass: true })
        }
        Command::Verify {
            common,
            negative_control,
            from_artifacts,
        } => {
            let prep = common.prepare()?;
            let report = pipeline::run_verify(&prep, from_artifacts, negative_control)?;
            let pass = report.pass;
            Ok(Outcome {
                summary: serde_json::to_value(&report).expect("serializes"),
                pass,
            })
        }
        Command::CompareOracle(args) => {
            let prep = args.prepare()?;
            let report = pipeline::run_compare_oracle(&prep)?;
            let pass = report.pass;
            Ok(Outcome {
                summary: serde_json::to_value(&report).expect("serializes"),
                pass,
            })
        }
        Command::Report { config, out } => {
            let dir = match (out, config) {
                (Some(d), _) => d,
                (None, Some(c)) => ProblemConfig::load(&c)?.output.dir,
                (None, None) => return Err(CliError::config("report needs --out or --config")),
            };
            let summary = pipeline::run_report(&dir)?;
            let pass = summary.get("pass").and_then(Value::as_bool).unwrap_or(false);
            Ok(Outcome { summary, pass })
        }
    }
}
