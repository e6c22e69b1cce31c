use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("signals live on different grids")]
    GridMismatch,
    #[error("invalid exponent p = {0}; need p >= 1 (p > 1 for square-function ratios)")]
    InvalidExponent(f64),
    #[error("grid is incompatible with the requested map: {0}")]
    IncompatibleGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not unimodular (determinant {0})")]
    NotUnimodular(i64),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("scale out of window: {0}")]
    Scale(String),
    #[error("scale ordering does not match the requested regime: {0}")]
    Regime(String),
    #[error("comparison failed: {0}")]
    ComparisonFailure(String),
    #[error("invalid factor specification: {0}")]
    InvalidSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
