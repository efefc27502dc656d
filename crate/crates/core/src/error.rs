//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad dimensions, counts, or option values).
    #[error("configuration error: {0}")]
    Config(String),

    /// A record in an input file could not be ingested.
    #[error("ingestion error in {record}: {reason}")]
    Ingest { record: String, reason: String },

    /// Vector or code length does not match what the operation expects.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Two hash vectors cannot be compared (length or alphabet differ).
    #[error("hash mismatch: {0}")]
    HashMismatch(String),

    /// An operation was handed parameters for the wrong transform scheme.
    #[error("scheme mismatch: expected {expected}, got {actual}")]
    SchemeMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    /// The enroll/verify protocol preconditions do not hold.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// An operation that needs data received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A file did not match its declared format.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors a user fixes by editing the run configuration,
    /// as opposed to failures of the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("csv error: {other:?}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
