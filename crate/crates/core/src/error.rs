use thiserror::Error;

/// Errors raised by rule construction, evaluation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the {domain} domain")]
    OutsideDomain { domain: String, point: Vec<f64> },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("evaluation failed at point {index}: {source}")]
    Evaluation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("Gram matrix is not positive definite: pivot {index} is {pivot:e} (tolerance {tolerance:e})")]
    NotPositiveDefinite {
        index: usize,
        pivot: f64,
        tolerance: f64,
    },

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("matrix is rank deficient (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("quadrature construction failed: {0}")]
    Construction(String),

    #[error("exactness residual {residual:e} exceeds tolerance {tolerance:e}")]
    ExactnessResidual { residual: f64, tolerance: f64 },

    #[error("unsupported rule file version {found:?} (expected {expected:?})")]
    Version { found: String, expected: String },

    #[error("checksum mismatch: file says {stored}, content hashes to {computed}")]
    Checksum { stored: String, computed: String },

    #[error("malformed rule file: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
