//! Error types shared across the toolkit.

use thiserror::Error;

/// Unified error type for all toolkit operations.
///
/// The variants are grouped so that callers (in particular the CLI) can
/// distinguish malformed inputs, numerical failures, and violated
/// preconditions without string matching.
#[derive(Debug, Error)]
pub enum Error {
    /// Input files, schemas, or parameter values that cannot be parsed or
    /// validated before any computation starts.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix dimensions inconsistent with the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A documented precondition of an operation does not hold
    /// (e.g. a singular g_y where invertibility is required).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// det(sE - A) is identically zero: the pencil has no spectrum.
    #[error("non-regular pencil: {0}")]
    NonRegular(String),

    /// A numerical routine failed to produce a usable result
    /// (eigensolver breakdown, Newton divergence, singular factorization).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI for this error class:
    /// 2 = input/schema error, 3 = numerical failure, 4 = precondition violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::NonRegular(_) | Error::Numerical(_) => 3,
            Error::Precondition(_) | Error::DimensionMismatch(_) => 4,
        }
    }
}
