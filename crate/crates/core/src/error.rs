use thiserror::Error;

/// Errors raised by thinlab operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution or family parameter lies outside its domain.
    #[error("parameter domain error: {0}")]
    Domain(String),
    /// The fold weights are not valid for the requested family.
    #[error("invalid thinning plan: {0}")]
    Plan(String),
    /// An observation lies outside the support of its family.
    #[error("observation outside support: {0}")]
    Support(String),
    /// Arguments are inconsistent with each other (shape mismatch, wrong mode, bad index).
    #[error("usage error: {0}")]
    Usage(String),
    /// The parameter of interest is a nuisance that must be known at thinning time.
    #[error("no information claim: {0}")]
    Scope(String),
    /// Input could not be parsed.
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    /// A report contained a non-finite value.
    #[error("non-finite value in report field `{0}`")]
    NonFinite(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
