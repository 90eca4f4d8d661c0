use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no token reached the minimum count")]
    AllWordsFiltered,

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("tag already present: {0}")]
    DuplicateTag(String),

    #[error("negative sampling needs at least two tags")]
    DegenerateTagSet,

    #[error("non-finite parameter detected after epoch {epoch}")]
    NaNDetected { epoch: usize },

    #[error("unknown tag: {0}")]
    UnknownTag(String),

    #[error("document has no in-vocabulary tokens")]
    EmptyDocument,

    #[error("document vector has zero norm")]
    ZeroVector,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
