//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector/matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Caller-supplied value outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed file contents (bad magic, unknown layout).
    #[error("format error: {0}")]
    Format(String),

    /// Structurally valid data that is internally inconsistent
    /// (truncated payload, image/label count mismatch, capacity shortfall).
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite values where finite math is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An API contract was violated (e.g. wrong synapse polarity).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A training run aborted (weight-explosion safety ceiling, etc.).
    #[error("run failed: {0}")]
    RunFailed(String),

    /// Bad configuration file or key.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to.
    /// 1 = usage/config, 2 = data, 3 = run failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 1,
            Error::Shape(_) | Error::Format(_) | Error::Data(_) | Error::Io(_) => 2,
            Error::Numeric(_) | Error::Contract(_) | Error::RunFailed(_) => 3,
        }
    }
}
