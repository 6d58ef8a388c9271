use thiserror::Error;

/// Errors raised by the certification pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("power iteration did not converge after {iterations} iterations (relative change {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("inconclusive classification: {0}")]
    Inconclusive(String),

    #[error("ODE integration failed: {0}")]
    Ode(String),

    #[error("subsequence selection exhausted: {0}")]
    SelectionExhausted(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("identity battery failed: {0}")]
    BatteryFailure(String),

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
