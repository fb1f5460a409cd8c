use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read corpus root {path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {source}")]
    Record {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty token bag for method {0}")]
    EmptyBag(String),

    #[error("no token reaches min_count={min_count}; vocabulary would be empty")]
    DegenerateVocab { min_count: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("embeddings mix representation kinds or widths")]
    MixedEmbeddings,

    #[error("cannot encode an empty sequence for method {0}")]
    EmptySequence(String),

    #[error("AST parse failed for method {method} at line {line}: {message}")]
    Parse { method: String, line: usize, message: String },

    #[error("unknown clone label {0:?}")]
    InvalidLabel(String),

    #[error("ground truth is empty")]
    EmptyTruth,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
