use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("degenerate spread interval [{lo}, {hi}]: need 0 < lo < hi")]
    DegenerateSpread { lo: f64, hi: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric positive definite: {0:?}")]
    NotSpd(SpdVerdict),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weight vector is zero")]
    ZeroWeights,
    #[error("quadratic form w^T S_b w is not positive ({0})")]
    DegenerateDenominator(f64),
    #[error("scale factor must be nonzero")]
    ZeroScale,
    #[error("entry {index} must be strictly positive, got {value}")]
    NonPositive { index: usize, value: f64 },
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("positivity breach at t = {t}: coordinate {index} = {value}")]
    PositivityBreach { t: f64, index: usize, value: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("finite-difference evaluation produced a non-finite value at coordinate {index}")]
    NonFiniteEvaluation { index: usize },
    #[error("empty trajectory")]
    EmptyTrajectory,
}

/// Outcome of [`crate::scatter::validate_spd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpdVerdict {
    Ok,
    NotSymmetric,
    NotPositiveDefinite,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
