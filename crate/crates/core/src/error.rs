//! Error type shared across the crate.

use std::fmt;

/// Errors produced by graph construction, design building, decoding, and I/O.
#[derive(Debug)]
pub enum Error {
    /// An argument violated a precondition (bad probability, vertex out of range, ...).
    Parameter(String),
    /// An input was outside the mathematical domain of the operation (e.g. inverse of 0).
    Domain(String),
    /// An index (test id, block id, level) was out of range.
    Range(String),
    /// A design/decoder configuration is inconsistent or infeasible.
    Config(String),
    /// The operation refuses to run (e.g. exhaustive census for too large a field).
    Refusal(String),
    /// A file could not be parsed.
    Parse(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(s) => write!(f, "parameter error: {s}"),
            Error::Domain(s) => write!(f, "domain error: {s}"),
            Error::Range(s) => write!(f, "range error: {s}"),
            Error::Config(s) => write!(f, "configuration error: {s}"),
            Error::Refusal(s) => write!(f, "refused: {s}"),
            Error::Parse(s) => write!(f, "parse error: {s}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
