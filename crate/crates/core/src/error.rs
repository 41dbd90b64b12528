use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exponents must be finite and nondecreasing (violated at position {position})")]
    Unsorted { position: usize },

    #[error("weak gap violated: chain starting at index {start} has length {len} > M = {m}")]
    WeakGapViolated { start: i64, len: usize, m: usize },

    #[error("alpha = {alpha} outside [{lo}, {hi}]")]
    AlphaOutOfRange { alpha: f64, lo: f64, hi: f64 },

    #[error("construction requires periodic family")]
    NotPeriodic,

    #[error("index sets do not match: {0}")]
    IndexMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("near-singular Gram matrix: min eigenvalue {min_eigenvalue:e}, norm {norm:e}")]
    NearSingular { min_eigenvalue: f64, norm: f64 },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
