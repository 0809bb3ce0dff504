use std::path::PathBuf;

use omicsfuse::OmicsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag or configuration value.
    #[error("{0}")]
    Usage(String),

    #[error("sample identifiers do not align: {}", .0.join(", "))]
    Alignment(Vec<String>),

    #[error("{0}")]
    Pipeline(OmicsError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 1 usage, 2 alignment, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Alignment(_) => 2,
            CliError::Pipeline(e) => match e.root() {
                OmicsError::Alignment(_) => 2,
                OmicsError::Argument(_) => 1,
                _ => 3,
            },
            CliError::Io { .. } | CliError::Parse { .. } => 4,
        }
    }
}

impl From<OmicsError> for CliError {
    fn from(e: OmicsError) -> Self {
        match e {
            OmicsError::Alignment(ids) => CliError::Alignment(ids),
            other => CliError::Pipeline(other),
        }
    }
}
