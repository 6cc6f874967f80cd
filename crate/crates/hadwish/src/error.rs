//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A size, grid or law parameter is outside its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Matrix dimensions do not line up for the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A sampled or computed entry is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The eigensolver exceeded its iteration budget.
    #[error("eigensolver did not converge: {0}")]
    SolverFailure(String),

    /// A deterministic theorem-backed bound was violated. This is a hard
    /// failure of the implementation, never a statistical fluctuation.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    /// Boundary bisection could not bracket the transition.
    #[error("bracket not found: {0}")]
    BracketNotFound(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}
