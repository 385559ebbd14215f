use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (structure={structure}, cluster={cluster})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        structure: f64,
        cluster: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {detail}")]
    Ingest {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("graph is empty: {0}")]
    EmptyGraph(String),

    #[error("negative sampling exhausted: {0}")]
    SamplingExhausted(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("evaluation protocol error: {0}")]
    Protocol(String),

    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures caused by numerics rather than by user input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::NonFiniteLoss { .. })
    }
}
