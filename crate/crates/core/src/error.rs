//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("missing tensor `{0}` in weight container")]
    MissingTensor(String),

    #[error("tensor `{name}` has shape {actual:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("tensor `{name}` has unsupported dtype `{dtype}`")]
    UnsupportedDtype { name: String, dtype: String },

    #[error("malformed weight container: {0}")]
    Container(String),

    #[error("tokenizer error: {0}")]
    Tokenizer(String),

    #[error("unknown token id {0} in decode")]
    UnknownTokenId(u32),

    #[error("token id {id} out of vocabulary (size {vocab_size})")]
    InvalidTokenId { id: u32, vocab_size: usize },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("sequence of {len} tokens exceeds context limit {limit}")]
    ContextOverflow { len: usize, limit: usize },

    #[error("{0} out of bounds")]
    OutOfBounds(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("text yields {0} token(s); need at least 2 for a conditional term")]
    DegenerateText(usize),

    #[error("no edit candidates survived filtering: {0}")]
    EmptySelection(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
