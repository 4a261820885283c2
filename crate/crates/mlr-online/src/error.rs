//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by estimators, generators, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its admissible range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Two quantities that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix that must be invertible or positive definite is not.
    #[error("singular or indefinite matrix: {0}")]
    Singular(String),

    /// Numerical integration failed to reach the requested tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// An internal consistency check failed during a run.
    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
