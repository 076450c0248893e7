use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the region where a model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model intermediate became NaN or infinite.
    #[error("non-finite value for `{symbol}`: {value}")]
    NonFinite { symbol: &'static str, value: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }
}

/// Fails with [`Error::NonFinite`] when `value` is NaN or infinite.
pub(crate) fn finite(symbol: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { symbol, value })
    }
}
