use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{value} lies outside [0, {horizon}]")]
    Range { value: f64, horizon: f64 },

    #[error("point (t = {t}, x = {x:?}) is not on the target")]
    NotOnTarget { t: f64, x: Vec<f64> },

    /// Cells (0-based) whose w0 falls below the projection threshold.
    #[error("process is impulsive on cells {cells:?} (w0 below {w0_min})")]
    ImpulsiveProcess { cells: Vec<usize>, w0_min: f64 },

    #[error("state became non-finite at s = {s}")]
    NonFiniteState { s: f64 },

    #[error("simplex did not terminate after {iterations} pivots")]
    SolverStall { iterations: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}
