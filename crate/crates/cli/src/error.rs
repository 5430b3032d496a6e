use serde::Serialize;
use thiserror::Error;

/// Failure of a CLI run. Each variant maps to a fixed process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    MissingArtifacts(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    code: i32,
    message: String,
}

#[derive(Serialize)]
struct ErrorEnvelope<'a> {
    error: ErrorBody<'a>,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
            CliError::MissingArtifacts(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
            CliError::MissingArtifacts(_) => "missing_artifacts",
            CliError::Io(_) => "io",
        }
    }

    /// Single-line JSON written to stderr on failure.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorEnvelope {
            error: ErrorBody {
                kind: self.kind(),
                code: self.exit_code(),
                message: self.to_string(),
            },
        })
        .expect("error serializes")
    }
}

/// Problem-definition errors from the core are configuration errors; the
/// rest are failures of the numerics.
impl From<dynkin_core::Error> for CliError {
    fn from(e: dynkin_core::Error) -> Self {
        use dynkin_core::Error as E;
        match e {
            E::Model(_) | E::ModeMismatch(_) | E::InvalidDensity(_) | E::Grid(_) | E::Problem(_) | E::Shape { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
