use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NlcdError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A spec problem located at a 1-based line and column.
    #[error("{path}:{line}:{column}: {message}")]
    Spec { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}:{line}: {message}")]
    Csv { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Core(#[from] nlcd_core::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, NlcdError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> NlcdError {
    let path = path.into();
    move |source| NlcdError::Io { path, source }
}
