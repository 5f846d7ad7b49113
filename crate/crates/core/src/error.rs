use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value produced by {0}")]
    NonFiniteValue(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    RowArity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown label {value:?}")]
    UnknownLabel { line: usize, value: String },
    #[error("line {line}: cannot parse {value:?} in numeric column {column}")]
    ParseValue {
        line: usize,
        column: String,
        value: String,
    },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("preprocess plan does not match dataset: {0}")]
    PlanMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("normal class is not present in the dataset")]
    MissingNormalClass,
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("model is in phase {found}, expected {expected}")]
    WrongPhase { expected: String, found: String },
    #[error("invalid fraction: {0}")]
    InvalidFraction(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error("archive: {0}")]
    Archive(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
