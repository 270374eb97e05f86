use thiserror::Error;

/// Errors surfaced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (shape, range, mismatch).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Numerical validation failed (non-unitary, non-Hermitian, ... beyond tolerance).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A run configuration is inconsistent or infeasible.
    #[error("configuration error: {0}")]
    Config(String),

    /// Restricted algebra generators became linearly dependent; the Gram solve
    /// would be meaningless. Reported instead of silently regularized.
    #[error("degenerate restriction: Gram condition number {cond:.3e} exceeds 1e12")]
    DegenerateRestriction { cond: f64 },

    /// A structured text input (CSV, config) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
