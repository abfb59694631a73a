use std::io;
use std::path::PathBuf;

/// Failures of dataset and file handling.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: missing dataset keys: {}", keys.join(", "))]
    MissingKeys { path: PathBuf, keys: Vec<String> },
    #[error("{path}: corrupt data: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("{path}: unsupported schema version {found} (this build reads version {expected})")]
    SchemaVersion { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(#[from] cpdecode_core::Error),
}

impl DataError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DataError::Io { path: path.into(), source }
    }

    pub fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        DataError::Corrupt { path: path.into(), reason: reason.into() }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        DataError::Format { path: path.into(), reason: reason.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, DataError>;
