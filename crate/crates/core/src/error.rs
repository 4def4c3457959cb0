use thiserror::Error;

/// Errors produced by the simulation and geometry routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The request is outside what the construction supports.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The request would exceed a configured resource guard.
    #[error("refused: {0}")]
    Refused(String),

    /// A Monte-Carlo or numerical procedure did not produce a usable result.
    #[error("computation failed: {0}")]
    Computation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for returning a parameter error from a formatted message.
macro_rules! param_err {
    ($($arg:tt)*) => {
        Err($crate::error::Error::Parameter(format!($($arg)*)))
    };
}
pub(crate) use param_err;
