use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a stated precondition (ranges, ordering, window mismatch).
    #[error("parameter error: {0}")]
    Parameter(String),
    /// The operation is not defined for this input (wrong variant, state outside support).
    #[error("domain error: {0}")]
    Domain(String),
    /// A numeric guarantee (truncation budget, nonzero normalizer) could not be met.
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
