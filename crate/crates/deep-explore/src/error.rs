use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad layer sizes, empty rosters, malformed TOML, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Runtime shape mismatch between tensors or parameter sets.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// API misuse: stale caches, wrong index kind, unknown users.
    #[error("usage error: {0}")]
    Usage(String),

    /// Non-finite values where finite numerics are required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An environment contract was violated (disallowed action, empty action set).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input validation of files and artifacts (schema mismatch, roster overlap).
    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
