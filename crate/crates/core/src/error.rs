//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Grid construction rejected (bad dimension, node counts, time bounds).
    #[error("invalid grid: {0}")]
    Grid(String),

    /// A precondition on an operation argument was violated.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A sampled or computed value was NaN/infinite where finiteness is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Coefficient field failed the ellipticity probe or declared constants are inconsistent.
    #[error("ellipticity violation: {0}")]
    Ellipticity(String),

    /// Linear solve inside a semigroup scheme failed.
    #[error("linear solve failure: {0}")]
    Solve(String),

    /// Binary container I/O or format error.
    #[error("container format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
