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

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("dataset is empty after dropping rows with missing values")]
    EmptyDataset,

    #[error("operation requires binary labels, dataset has {n_classes} classes")]
    NonBinaryLabels { n_classes: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node {node} has {n_oob} out-of-bag samples, {required} required")]
    InsufficientOob { node: usize, n_oob: u64, required: u64 },

    #[error("cover is empty at the root of tree {tree}")]
    EmptyCover { tree: usize },

    #[error("brute-force Shapley values limited to {max} features, got {got}")]
    TooManyFeatures { got: usize, max: usize },

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("expected {expected} attributions, got {got}")]
    WrongKind { expected: &'static str, got: &'static str },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
