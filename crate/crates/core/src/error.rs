use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("signal range violation: {0}")]
    Range(String),

    #[error("metric is not uniformly elliptic at node ({i}, {j})")]
    NonElliptic { i: usize, j: usize },

    #[error("inner solver did not converge after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("active set reached window boundary")]
    BoundaryContact,

    #[error("could not bracket mass {target:e}: {reason}")]
    Bracket { target: f64, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
