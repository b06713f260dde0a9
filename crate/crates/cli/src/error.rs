use std::path::PathBuf;

use autodrop_core::LabError;

/// Failure of a CLI run, carrying the process exit status it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<LabError> for CliError {
    fn from(err: LabError) -> Self {
        match err {
            LabError::NonFinite(msg) => CliError::Numeric(msg),
            LabError::Config(msg) => CliError::Config(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
