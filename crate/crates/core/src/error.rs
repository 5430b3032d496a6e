use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model coefficients or parameters.
    #[error("model error: {0}")]
    Model(String),

    /// Closed-form density requested for coefficients that vary in space.
    #[error("density mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("penalized solve did not converge at time slice {slice} (eps = {eps:e})")]
    PenaltyDivergence { slice: usize, eps: f64 },

    /// A property that a monotone discretization guarantees was violated.
    #[error("scheme error: {0}")]
    Scheme(String),

    #[error("game iteration did not converge after {iterations} iterations (last delta {delta:e})")]
    GameDivergence { iterations: usize, delta: f64 },

    #[error("projected relaxation did not converge at slice {slice} after {sweeps} sweeps")]
    RelaxationDivergence { slice: usize, sweeps: usize },

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("simulation error: {0}")]
    Simulation(String),
}
