use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(String),
    /// A numerical stage failed (solver breakdown, basin exit, ...).
    #[error("{stage} failed: {message}")]
    Numerical { stage: String, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn numerical(stage: &str, err: impl std::fmt::Display) -> Self {
        CliError::Numerical {
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }

    /// 1 for failed computations, 2 for configuration and environment problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical { .. } => 1,
            _ => 2,
        }
    }
}
