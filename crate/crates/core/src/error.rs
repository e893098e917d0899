//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong while building or evaluating approximations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: entry ({i},{j}) differs from ({j},{i}) by {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("operator is indefinite: eigenvalue {min_eigenvalue:e} below -tolerance {tol:e}")]
    IndefiniteInput { min_eigenvalue: f64, tol: f64 },

    #[error("perturbation delta[{index}] = {value} must be > -1")]
    DeltaOutOfRange { index: usize, value: f64 },

    #[error("base covariance is numerically singular (min eigenvalue {min_eigenvalue:e})")]
    SingularBase { min_eigenvalue: f64 },

    #[error("Rényi order rho = {0} must lie strictly in (0, 1)")]
    RhoOutOfRange(f64),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rank {rank} out of range 0..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("update leaves the admissible class: coefficient {value} must be < 1")]
    NotPositive { value: f64 },

    #[error("loss function rejected: {0}")]
    InvalidLossFn(String),

    #[error("orthonormality violated: max deviation {0:e} exceeds tolerance")]
    NotOrthonormal(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
