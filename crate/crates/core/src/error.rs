//! Crate-wide error type.

use std::path::PathBuf;

/// Errors surfaced by the pipeline. Per-file ingest problems are *not*
/// errors at this level; they are collected as [`crate::ingest::IngestIssue`]s
/// so a corpus load can continue past a bad file.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}{}: {message}", location.as_deref().map(|l| format!(" at {l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        location: Option<String>,
        message: String,
    },

    #[error("invalid configuration ({field}): {message}")]
    Config { field: String, message: String },

    #[error("duplicate doc_id `{doc_id}` from {first} and {second}")]
    DuplicateDocId {
        doc_id: String,
        first: String,
        second: String,
    },

    #[error("vocabulary validation failed: {0}")]
    Vocabulary(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("embedder mismatch: index built with `{index}`, query embedder is `{query}`")]
    EmbedderMismatch { index: String, query: String },

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("missing input {path}; run `{producer}` first")]
    MissingInput { path: PathBuf, producer: String },

    #[error("endpoint request failed: {0}")]
    Endpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, location: Option<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            location,
            message: message.into(),
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
