// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

/// Error type shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("degenerate buffer: {0}")]
    DegenerateBuffer(String),
    #[error("evaluation impossible: {0}")]
    EvalImpossible(String),
    #[error("timed out after {elapsed_secs:.3}s")]
    Timeout { elapsed_secs: f64 },
    #[error(transparent)]
    Load(#[from] LoadError),
}

impl Error {
    pub(crate) fn invalid_input(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }

    pub(crate) fn invalid_config(msg: impl Into<String>) -> Self {
        Self::InvalidConfig(msg.into())
    }
}

/// Failures raised while reading or writing dataset and annotation files.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("missing or non-finite value at sample {row}, dimension {col}")]
    NonFinite { row: usize, col: usize },
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("invalid annotations: {0}")]
    Annotations(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
