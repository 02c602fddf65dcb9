use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A divisibility or range precondition on job or cluster parameters failed.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("{what} {value} out of range [1, {max}]")]
    Range {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("payload width mismatch: expected {expected} bytes, got {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("instance too large for exhaustive search: ~{estimate:.3e} candidates (limit {limit:.0e})")]
    TooLarge { estimate: f64, limit: f64 },

    #[error("shuffle failed: {0}")]
    Shuffle(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
