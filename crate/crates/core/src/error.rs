use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Structurally invalid input (malformed partition, unsorted breakpoints, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Requested size outside the supported range.
    #[error("size error: {0}")]
    Size(String),

    /// A truncated sequence was queried past its last stored term.
    #[error("truncation error: requested order {requested}, only {available} available")]
    Truncation { requested: usize, available: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// An operation that needs non-negative free cumulants received a negative one.
    #[error("regime error: cumulant r_{index} = {value} is negative")]
    Regime { index: usize, value: String },

    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// An adapted biprocess asked for path data from the future.
    #[error("contract error: {0}")]
    Contract(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
