use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("missing column {0}")]
    MissingColumn(String),

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("empty series")]
    EmptySeries,

    #[error("series {0} lies entirely outside the candle date range")]
    DisjointSeries(String),

    #[error("window {window} needs {requested} rows, only {available} available")]
    InsufficientRows { window: String, requested: usize, available: usize },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: String, message: String },

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("solver did not converge after {iterations} iterations ({violations} KKT violations remaining)")]
    NotConverged { iterations: usize, violations: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }
}
