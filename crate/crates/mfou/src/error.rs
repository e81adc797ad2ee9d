//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: must satisfy {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("Hurst index {hurst} lies on an excluded boundary (1/2 or 3/4)")]
    BoundaryHurst { hurst: f64 },

    #[error("local shift leaves the admissible parameter region: {detail}")]
    ShiftOutOfDomain { detail: String },

    #[error("sampled spectral density is singular at lambda = 0 for H > 1/2")]
    SingularFrequency,

    #[error("operation requires the {expected} regime but parameters are {got}")]
    WrongRegime {
        expected: &'static str,
        got: &'static str,
    },

    #[error("quadrature failed to converge within the panel budget (worst panel error {worst:e})")]
    QuadratureBudget { worst: f64 },

    #[error("covariance matrix is not positive definite (pivot {pivot}); try a tighter quadrature tolerance")]
    NotPositiveDefinite { pivot: usize },

    #[error("mesh delta = {delta} is too coarse; the likelihood pipeline requires delta < 1")]
    MeshTooCoarse { delta: f64 },

    #[error("dense matrix size n = {n} exceeds the desk-scale budget (max {max})")]
    SizeBudget { n: usize, max: usize },

    #[error(
        "circulant embedding has negative eigenvalues (min/max ratio {ratio:e}) and n = {n} is too large for the Cholesky fallback"
    )]
    EmbeddingNotPositive { ratio: f64, n: usize },

    #[error("limit extraction did not stabilize: last relative change {last_change:e} after {steps} refinements")]
    LimitExtraction { last_change: f64, steps: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
