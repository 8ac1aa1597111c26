use thiserror::Error;

/// Errors raised by the resampling engines, roots and harness.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("non-finite value in input")]
    NonFinite,

    #[error("sample is not rectangular: {len} values for {cols} columns")]
    Ragged { len: usize, cols: usize },

    #[error("degenerate coordinate {0}")]
    DegenerateCoordinate(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exact solver limit: k = {0} exceeds 12")]
    ExactSolverLimit(usize),

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("enumeration of {count} items exceeds cap {cap}")]
    EnumerationCap { count: f64, cap: f64 },

    #[error("{dropped} of {total} resamples were degenerate (more than 1%)")]
    TooManyDegenerate { dropped: usize, total: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Degenerate draws are dropped and counted by the engines instead of aborting.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateCoordinate(_) | Error::Singular)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
