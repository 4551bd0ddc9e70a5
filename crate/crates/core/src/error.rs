use thiserror::Error;

/// Errors raised by the spectral, geometric and stochastic routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid weight model: {0}")]
    InvalidWeights(String),
    #[error("frequency lattice with {points} grid points exceeds the budget of {budget}")]
    LatticeTooLarge { points: usize, budget: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("symbol is not finite at frequency {0:?}")]
    NonFiniteSymbol(Vec<i64>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("field is not mean-zero (|c_0| = {0:e})")]
    NotMeanZero(f64),
    #[error("winding search did not resolve within radius {0}")]
    WindingSearchExhausted(i64),
    #[error("lattice tail {tail:e} too large for t = {t}")]
    BandwidthTooSmall { t: f64, tail: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidParameter(msg.into())
}
