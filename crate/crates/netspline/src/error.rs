use std::io;
use std::path::{Path, PathBuf};

use netspline_core::Error as CoreError;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    /// Malformed or unsupported file content.
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(", line {l}")).unwrap_or_default())]
    Format {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },

    /// Bad command line or configuration.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl AppError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, line: Option<u64>, message: impl Into<String>) -> Self {
        AppError::Format {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 2 for usage, input and configuration problems, 1
    /// for failures of the computation itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io { .. } | AppError::Format { .. } | AppError::Usage(_) => 2,
            AppError::Core(e) => match e {
                CoreError::Structure(_)
                | CoreError::Validation(_)
                | CoreError::Contract(_)
                | CoreError::Snap { .. } => 2,
                CoreError::Domain(_)
                | CoreError::NoData
                | CoreError::NotConverged { .. }
                | CoreError::RhoDiverges
                | CoreError::Study { .. } => 1,
            },
        }
    }
}
