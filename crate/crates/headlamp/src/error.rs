use std::io;
use std::path::{Path, PathBuf};

/// Errors from file handling and the command-line driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: line {line}: {message}", path.display())]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Spec { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] headlamp_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), message: message.into() }
    }

    /// Process exit code: 2 for bad arguments or specs, 3 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        use headlamp_core::Error as Core;
        match self {
            Error::Usage(_) | Error::Spec { .. } => 2,
            Error::Core(Core::Argument(_) | Core::Spec(_) | Core::Config(_)) => 2,
            _ => 3,
        }
    }
}
