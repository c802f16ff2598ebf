use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NavError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] navnet_core::Error),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, NavError>;

impl NavError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> NavError {
        NavError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> NavError {
        NavError::Format { path: path.into(), message: message.into() }
    }

    /// Process exit code: 1 configuration, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        use navnet_core::Error as E;
        match self {
            NavError::Config(_) | NavError::Core(E::Config(_)) => 1,
            NavError::Io { .. } | NavError::Format { .. } => 2,
            NavError::Core(E::Diverged { .. }) | NavError::Runtime(_) => 3,
            NavError::Core(_) => 2,
        }
    }
}
