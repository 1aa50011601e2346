use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes, subsystem layouts or label alphabets do not fit together.
    #[error("structural error: {0}")]
    Structural(String),
    /// An argument lies outside the domain of the requested quantity.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative solver stopped without meeting its tolerance.
    #[error("solver error: {msg} (residual {residual:e})")]
    Solver { msg: String, residual: f64 },
    /// A configured size or work limit would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),
    /// A supplied object (POVM, certificate, state) failed validation.
    #[error("validation failed: {0}")]
    Validation(String),
    /// Malformed exchange data.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>, residual: f64) -> Self {
        Error::Solver {
            msg: msg.into(),
            residual,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
