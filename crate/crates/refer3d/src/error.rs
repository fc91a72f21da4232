//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by kernels, data handling, and the training pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or mask shapes are inconsistent.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation precondition was violated (empty input, bad range, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A token id falls outside the embedding table.
    #[error("unknown token id {id} (vocabulary size {vocab})")]
    Vocabulary { id: usize, vocab: usize },

    /// A gradient or loss became NaN/Inf.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Indices in a sample are inconsistent with the structures built from it.
    #[error("data inconsistency: {0}")]
    DataConsistency(String),

    /// A dataset record could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A serialized file carries a version this build does not read.
    #[error("unsupported version {found} (expected {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },

    /// A run configuration value is invalid or incompatible.
    #[error("config error: {0}")]
    Config(String),

    /// Metrics were requested over an empty record set.
    #[error("empty evaluation set")]
    EmptyEvaluation,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
