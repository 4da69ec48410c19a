use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header {path}: {message}")]
    Header { path: PathBuf, message: String },
    #[error("unknown dtype {0:?}")]
    UnknownDtype(String),
    #[error("length mismatch: expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("empty volume")]
    EmptyVolume,
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("constant volume")]
    ConstantVolume,
    #[error("empty mask")]
    EmptyMask,
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("no events in cohort")]
    NoEvents,
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("constant column {0:?}")]
    ConstantColumn(String),
    #[error("all columns have zero variance")]
    AllColumnsConstant,
    #[error("missing feature {0:?}")]
    MissingFeature(String),
    #[error("failed to converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },
    #[error("training diverged at iteration {0}")]
    Diverged(usize),
    #[error("stratum is empty: {0}")]
    EmptyStratum(&'static str),
    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("too few events: {events} events for {folds} folds")]
    TooFewEvents { events: usize, folds: usize },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
