use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("timestamp {got} precedes previous timestamp {previous}")]
    NonMonotoneTime { previous: f64, got: f64 },

    #[error("invalid timestamp {0}: must be finite and non-negative")]
    InvalidTime(f64),

    #[error("invalid token {0:?}: tokens must be non-empty and free of whitespace")]
    InvalidToken(String),

    #[error("invalid reference document: {0}")]
    InvalidReference(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid caption cues: {0}")]
    InvalidCaptions(String),

    #[error("{0}")]
    Undefined(&'static str),

    #[error("segment count mismatch: {hyp} hypothesis vs {reference} reference segments")]
    SegmentMismatch { hyp: usize, reference: usize },

    #[error("configuration beta={beta} k={k}, document {document}: {source}")]
    Sweep {
        beta: f64,
        k: usize,
        document: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
