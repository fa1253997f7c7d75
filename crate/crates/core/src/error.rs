use std::path::PathBuf;

use thiserror::Error;

use crate::protocol::TransportError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} exceeds the limit of {cap}")]
    SizeLimit {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("operation requires a dense game, got a sparse one")]
    UnsupportedRepresentation,

    #[error("input outside the domain [0,1]: coordinate {index} = {value}")]
    Domain { index: usize, value: f64 },

    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("budget {budget} is outside [{min}, {max}]")]
    Budget { budget: u128, min: u128, max: u128 },

    #[error("model failure on batch {batch}: {source}")]
    ModelTransport {
        batch: usize,
        #[source]
        source: TransportError,
    },

    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
