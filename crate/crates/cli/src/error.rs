use std::path::PathBuf;

use thiserror::Error;

/// Failures that end a command before it can report a result. All map to
/// exit code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] imcf_profile::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: does not match {schema}: {details}")]
    Schema {
        path: PathBuf,
        schema: &'static str,
        details: String,
    },

    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("verification could not run: {0}")]
    Verification(String),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
