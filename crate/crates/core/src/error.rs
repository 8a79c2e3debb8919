use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("unscorable documents (no tokens): {}", .0.join(", "))]
    Unscorable(Vec<String>),

    #[error("{0}: empty corpus")]
    EmptyCorpus(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("budget exceeds corpus ({budget} > {total} tokens)")]
    BudgetExceedsCorpus { budget: u64, total: u64 },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("unknown document id {0:?}")]
    UnknownId(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Internal,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => {
                ErrorClass::Config
            }
            Error::Io { .. } | Error::Json(_) => ErrorClass::Internal,
            _ => ErrorClass::Data,
        }
    }
}
