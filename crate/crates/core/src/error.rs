use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

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
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("empty input: {0}")]
    Empty(String),
    /// An outcome was requested for a record whose label is masked.
    #[error("outcome of record {id} is masked (rejected applicant, not revealed)")]
    MaskedOutcome { id: usize },
    #[error("outcome of record {id} is not available")]
    OutcomeUnavailable { id: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training set contains a single class ({0})")]
    SingleClass(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model document error at line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("config error at line {line}, key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
