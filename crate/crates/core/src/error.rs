use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: {reason}")]
    BadCell {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("invalid label {0}; labels must be -1 or +1")]
    InvalidLabel(i64),

    #[error("kernel kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    #[error("ensemble fingerprint mismatch: representation built from {expected}, got {got}")]
    FingerprintMismatch { expected: String, got: String },

    #[error("correlation is undefined for a constant vector")]
    ConstantVector,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("{0}")]
    Invalid(String),
}
