use std::path::{Path, PathBuf};

use lzs_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2: invalid input, 3: numerical or analysis failure, 4: I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                CoreError::IntegrationFailure { .. }
                | CoreError::CellFailure { .. }
                | CoreError::Analysis(_) => 3,
                CoreError::Io(_) => 4,
                _ => 2,
            },
        }
    }
}
