use std::io;

use thiserror::Error;

/// Failure while decoding a matrix, key or envelope file.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} values, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u8, found: u8 },
    #[error("malformed value: {0}")]
    BadValue(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("ill-conditioned key: margin {margin:e} below threshold {threshold:e}")]
    IllConditionedKey { margin: f64, threshold: f64 },
    #[error("key generation failed after {0} resampling attempts")]
    KeygenFailure(usize),
    #[error("underdetermined design: {rows} rows for {cols} columns")]
    UnderdeterminedDesign { rows: usize, cols: usize },
    #[error("singular design: pivot {pivot:e} below {threshold:e}")]
    SingularDesign { pivot: f64, threshold: f64 },
    #[error("eigensolver did not converge within {0} sweeps")]
    ConvergenceFailure(usize),
    #[error("complex eigenvalue with imaginary part {0:e}: input is not similar to a symmetric matrix")]
    SpectrumAssumption(f64),
    #[error("verification rejected the {0}")]
    VerificationFailed(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit status used by the CLI for each error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidDimension(_) => 10,
            Error::Parameter(_) => 11,
            Error::InvalidKey(_) => 12,
            Error::IllConditionedKey { .. } => 13,
            Error::KeygenFailure(_) => 14,
            Error::UnderdeterminedDesign { .. } => 15,
            Error::SingularDesign { .. } => 16,
            Error::ConvergenceFailure(_) => 17,
            Error::SpectrumAssumption(_) => 18,
            Error::Parse(_) => 19,
            Error::Io(_) => 20,
            Error::VerificationFailed(_) => 21,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidDimension(msg.into()))
}
