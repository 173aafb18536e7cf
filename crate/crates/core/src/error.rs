//! Crate-level error with a process exit code.

use thiserror::Error;

use crate::estimators::EstimateError;
use crate::markov::MarkovError;
use crate::protocol::ProtocolError;
use crate::simulator::SimError;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input: parameters, specs, flags. Exit code 2.
    #[error("validation error: {0}")]
    Validation(String),
    /// A well-formed input the numerics cannot handle. Exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }
}

impl From<MarkovError> for Error {
    fn from(e: MarkovError) -> Self {
        use MarkovError::*;
        match e {
            Empty | NonSquare { .. } | RowSumViolation { .. } | EntryOutOfRange { .. } | IndexOutOfRange { .. }
            | InvalidDistribution(_) => Error::Validation(e.to_string()),
            _ => Error::Numerical(e.to_string()),
        }
    }
}

impl From<ProtocolError> for Error {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Markov(inner) => inner.into(),
            ProtocolError::ZeroProbability { .. } | ProtocolError::DegenerateChain => Error::Numerical(e.to_string()),
            _ => Error::Validation(e.to_string()),
        }
    }
}

impl From<EstimateError> for Error {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Markov(inner) => inner.into(),
            EstimateError::Protocol(inner) => inner.into(),
            EstimateError::Unreachable => Error::Numerical(e.to_string()),
            _ => Error::Validation(e.to_string()),
        }
    }
}

impl From<SimError> for Error {
    fn from(e: SimError) -> Self {
        Error::Validation(e.to_string())
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Validation(e.to_string())
        }
    }
}
