//! Host-side companion to `navnet-core`: log and dataset files, checkpoints,
//! threaded batch execution, evaluation outputs, the streaming harness and
//! the command implementations behind the `navnet` binary.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod logio;
pub mod parallel;
pub mod stream;

pub use error::{NavError, Result};
pub use navnet_core as core;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| NavError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| NavError::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| NavError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| NavError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| NavError::format(path, e.to_string()))
}
