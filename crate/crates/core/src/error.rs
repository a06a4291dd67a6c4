//! Crate-wide error type. Variants map onto the CLI exit-code contract:
//! invalid arguments are usage/config problems, data errors cover malformed
//! or inconsistent input, numerical failures cover divergence and failed
//! gradient verification.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
