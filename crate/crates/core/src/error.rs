use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong across loading, linking, and scoring.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed target label {label:?}: {reason}")]
    MalformedLabel { label: String, reason: String },

    #[error("invalid span [{start}, {end}) in {context:?}: {reason}")]
    InvalidSpan {
        start: usize,
        end: usize,
        context: String,
        reason: String,
    },

    #[error("overlapping spans [{0}, {1}) and [{2}, {3})")]
    OverlappingSpans(usize, usize, usize, usize),

    #[error("schema {db_id:?}: {reason}")]
    InvalidSchema { db_id: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {reason}", path.display())]
    Record {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{}: {reason}", path.display())]
    Load { path: PathBuf, reason: String },

    #[error("alignment: {0}")]
    Alignment(String),

    #[error("invalid linker config: {0}")]
    Config(String),

    #[error("agreement undefined: {0}")]
    UndefinedAgreement(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("split: {0}")]
    Split(String),

    #[error("{0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
