//! Workbench around the polarimetric pose core: float-image archives,
//! scene configuration and sampling, evaluation reports, and the
//! consistency checks wired into the `polarforge selfcheck` command.

pub mod archive;
pub mod formats;
pub mod pfm;
pub mod report;
pub mod scene;
pub mod selfcheck;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    /// Unusable input: missing files, malformed JSON, out-of-range values.
    #[error("bad input: {0}")]
    BadInput(String),

    /// Malformed or inconsistent archive contents.
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),

    /// A physical or numerical invariant failed at runtime.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

impl WorkbenchError {
    /// Process exit code: 2 for bad input, 3 for invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::BadInput(_) | WorkbenchError::CorruptArchive(_) => 2,
            WorkbenchError::InvariantViolation(_) => 3,
        }
    }
}

impl From<std::io::Error> for WorkbenchError {
    fn from(e: std::io::Error) -> Self {
        WorkbenchError::BadInput(e.to_string())
    }
}

impl From<serde_json::Error> for WorkbenchError {
    fn from(e: serde_json::Error) -> Self {
        WorkbenchError::BadInput(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, WorkbenchError>;

/// Writes bytes atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| std::path::Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into()),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
