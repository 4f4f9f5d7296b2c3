use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size error: n = {n} exceeds the limit of {limit} for {what}")]
    Size {
        what: &'static str,
        n: usize,
        limit: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for failures of floating-point evaluation rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
