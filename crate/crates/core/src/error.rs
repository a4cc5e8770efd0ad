use thiserror::Error;

/// Errors raised by the modem, channel, detector and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `N / alpha` is not an integer, so no length-N' transform exists.
    #[error("fast path unavailable: N / alpha = {n}·{den}/{num} is not an integer")]
    FastPathUnavailable { n: usize, num: u32, den: u32 },

    #[error("cyclic prefix of {cp_len} samples is shorter than the maximum delay {l_max}")]
    InsufficientCp { cp_len: usize, l_max: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::InvalidDimension(msg.into())
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
