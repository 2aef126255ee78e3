use thiserror::Error;

/// Errors raised by the servoing primitives and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point sits on or behind the camera plane.
    #[error("non-positive depth {depth}")]
    NonPositiveDepth { depth: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// `LᵀL` is not positive definite, so the pseudo-inverse does not exist.
    #[error("interaction matrix is rank deficient (min eigenvalue of LᵀL = {min_eigenvalue:e})")]
    RankDeficient { min_eigenvalue: f64 },

    #[error("solver did not converge within {iterations} iterations")]
    SolverFailure { iterations: usize },

    #[error("covariance is not diagonal; closed-form square quantile does not apply")]
    UnsupportedCovariance,

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(&'static str),

    #[error("certification failed: {0}")]
    CertificationFailed(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
