use thiserror::Error;

/// Errors produced by the smoothing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("affine term {index}: {reason}")]
    AffineTerm { index: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("smoothing schedule exhausted at t = {t} (mu = {mu})")]
    ScheduleExhausted { t: f64, mu: f64 },

    #[error("bound undefined: {0}")]
    UndefinedBound(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("numerical divergence at step {step}")]
    NumericalDivergence { step: usize },

    #[error("smoothing parameter is not positive at t = {t} inside the integration interval")]
    IllPosedInterval { t: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    Stiffness { t: f64, h: f64 },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
