use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("matrix is not positive definite: leading principal minor of order {minor} is not positive")]
    NotPositiveDefinite { minor: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is outside the supported range 1..=64")]
    UnsupportedDimension(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("autoregression is not stable: spectral radius {rho:.6} >= 1")]
    Unstable { rho: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("state corruption: {0}")]
    StateCorruption(String),

    #[error("insufficient data: the design has not grown beyond its prior")]
    InsufficientData,

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("offspring draw cap of {cap} exceeded (population {population})")]
    DrawCapExceeded { cap: u64, population: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
