//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by ingestion, factorization and reporting stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input data; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Column schemas that cannot be reconciled (feature or membership matrices).
    #[error("schema mismatch: {0}")]
    Schema(String),

    /// A feature definition that names an unknown base feature or aggregator.
    #[error("unknown feature definition: {0}")]
    Definition(String),

    #[error("unknown node: {0}")]
    UnknownNode(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Numerical failure (non-finite values, singular systems, divergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
