//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by geometry, optimization, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not match the operation's contract.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input violates a value-level precondition (non-finite entry, bad range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A tangent vector is not spacelike at its base point.
    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),

    /// A matrix fails the rotation-group checks (orthogonality / determinant).
    #[error("not a rotation matrix: {0}")]
    InvalidRotation(String),

    /// A matrix fails the Lorentz-group checks.
    #[error("not a Lorentz transformation: {0}")]
    InvalidLorentz(String),

    /// Gram-Schmidt hit a degenerate column.
    #[error("degenerate input at column {column}: {message}")]
    Degenerate { column: usize, message: String },

    /// Projection produced a non-timelike intermediate (invalid input upstream).
    #[error("degenerate projection: {0}")]
    DegenerateProjection(String),

    /// A point fell outside the open unit disk during model conversion.
    #[error("point outside the Poincare disk: norm {0}")]
    OutOfDisk(f64),

    /// Fixed-point iteration failed to converge; carries the last iterate.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    /// Retraction could not produce a valid manifold point.
    #[error("retraction failed: {0}")]
    Retraction(String),

    /// The objective became non-finite during optimization; carries the
    /// objective trace up to the failure.
    #[error("optimization failed at iteration {iteration}: {message}")]
    Optimization {
        iteration: usize,
        message: String,
        trace: Vec<f64>,
    },

    /// A metric is undefined for the given inputs (e.g. single-class AUC).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
