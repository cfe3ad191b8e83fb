use thiserror::Error;

/// Failures of numerical procedures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericalError {
    #[error("quadrature did not reach tolerance {requested:e} (error estimate {achieved:e})")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },
    #[error("tail estimate {tail:e} exceeds tolerance {tolerance:e}")]
    TailTooLarge { tail: f64, tolerance: f64 },
    #[error("mode {mode:?} is not diagonalizable: |G/F| = {ratio} (limit {limit})")]
    NotDiagonalizable { mode: [i32; 3], ratio: f64, limit: f64 },
    #[error("{0}")]
    Other(String),
}

/// Library error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("guard `{guard}` violated: {detail}")]
    Guard { guard: &'static str, detail: String },
    #[error("basis dimension {count} exceeds limit {limit}")]
    DimensionLimit { count: u128, limit: usize },
    #[error("cache corruption: {0}")]
    Cache(String),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
