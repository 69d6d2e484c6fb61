use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum HarError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("header mismatch in {path}: expected `{expected}`, found `{found}`")]
    HeaderMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("malformed row {row} in {path}: {reason}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("no trials found under {0}")]
    NoTrials(PathBuf),

    #[error("subject information file not found under {0}")]
    MissingSubjectInfo(PathBuf),

    #[error("subject `{0}` is referenced but has no metadata")]
    OrphanSubject(String),

    #[error("unknown subject `{0}`")]
    UnknownSubject(String),

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged: {0}")]
    NonFiniteLoss(String),

    #[error("leakage: test subject `{0}` found in training data")]
    Leakage(String),
}

pub type Result<T> = std::result::Result<T, HarError>;

impl HarError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        HarError::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, row: usize, reason: impl Into<String>) -> Self {
        HarError::MalformedRow {
            path: path.into(),
            row,
            reason: reason.into(),
        }
    }
}
