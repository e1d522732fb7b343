use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants map one-to-one onto the CLI exit-code contract: usage and
/// parse errors exit with 2, domain and resource errors with 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller violated a precondition (shape, range, argument combination).
    #[error("usage error: {0}")]
    Usage(String),
    /// The numerical problem is outside the domain where it is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A requested computation would exceed fixed resource limits.
    #[error("resource error: {0}")]
    Resource(String),
    /// Scenario or function file could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// An internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
