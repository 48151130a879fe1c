//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Two arrays that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter lies outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input data contain NaN or infinite entries.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// The constraint set of an optimization problem is empty.
    #[error("infeasible problem: {0}")]
    Infeasible(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A linear system is singular to working precision.
    #[error("singular linear system: {0}")]
    Singular(String),

    /// An iterative solver hit its iteration cap above tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    /// Labels required by the operation are absent.
    #[error("labels required: {0}")]
    MissingLabels(String),

    /// A selection step kept no rows.
    #[error("empty selection: {0}")]
    EmptySelection(String),

    /// A data file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
