use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose by {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} is below tolerance")]
    NotPsd { eigenvalue: f64 },

    #[error("Cholesky factorization failed at pivot {index} (value {pivot:e})")]
    Cholesky { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate w{index} is out of range for a space of dimension {dim}")]
    CoordinateOutOfRange { index: usize, dim: usize },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical overflow while evaluating {0}")]
    Overflow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("functional is not centered: mean {mean:e} is outside 3 standard errors ({std_error:e})")]
    NotCentered { mean: f64, std_error: f64 },

    #[error("the two fields share coordinate w{index}; disjoint coordinate blocks are required")]
    SharedCoordinates { index: usize },

    #[error("condition violated: {0}")]
    ConditionViolated(String),

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("N = {n} exceeds the exact-enumeration limit {limit}; use a Monte Carlo estimator")]
    TooLarge { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
