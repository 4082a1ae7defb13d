//! Error taxonomy shared across the crate.
//!
//! Numerical routines distinguish *caller* mistakes (bad arguments,
//! inconsistent configuration, malformed data) from *runtime* failures
//! (quadrature or iteration that refuses to converge, singular linear
//! systems). Keeping the classes separate lets the CLI map each to a
//! stable machine-readable tag.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller passed an argument outside the documented domain
    /// (wrong dimension, empty grid, non-positive radius, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative or adaptive numerical procedure failed to reach its
    /// target accuracy within its budget.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Inconsistent or unusable configuration (unknown registry name,
    /// malformed config file, degenerate normalization constant).
    #[error("configuration error: {0}")]
    Config(String),

    /// Sampled data violated a contract (e.g. a problem coefficient
    /// evaluated to a non-finite value at a concrete point).
    #[error("bad data: {0}")]
    Data(String),

    /// A linear system could not be factorized.
    #[error("singular system: {0}")]
    Singular(String),

    /// The requested operation is not provided for these inputs
    /// (missing exact solution, unsupported dimension, ...).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV encoding/decoding failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable lowercase tag for machine-readable error records.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Singular(_) => "singular",
            Error::Unsupported(_) => "unsupported",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
