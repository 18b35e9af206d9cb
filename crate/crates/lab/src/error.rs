use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },
    #[error("{}: cache format `{found}`, this build reads `{expected}`", path.display())]
    CacheVersion { path: PathBuf, found: String, expected: String },
    #[error("{}: checksum mismatch, the file was modified or truncated", path.display())]
    Corrupt { path: PathBuf },
    #[error("link collision: {0}")]
    LinkCollision(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] embedlab_core::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        LabError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        LabError::Parse { path: path.to_path_buf(), line, message: message.into() }
    }

    pub fn data(path: &Path, message: impl Into<String>) -> Self {
        LabError::Data { path: path.to_path_buf(), message: message.into() }
    }

    /// Stable identifier used in the CLI error record.
    pub fn code(&self) -> &'static str {
        match self {
            LabError::Io { .. } => "io",
            LabError::Parse { .. } => "parse",
            LabError::Data { .. } => "data",
            LabError::CacheVersion { .. } => "cache_version",
            LabError::Corrupt { .. } => "corrupt",
            LabError::LinkCollision(_) => "link_collision",
            LabError::Config(_) => "config",
            LabError::Core(_) => "model",
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            LabError::Io { path, .. }
            | LabError::Parse { path, .. }
            | LabError::Data { path, .. }
            | LabError::CacheVersion { path, .. }
            | LabError::Corrupt { path } => Some(path),
            _ => None,
        }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| LabError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> LabError {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => LabError::io(path, e),
        other => LabError::parse(path, line, format!("{other:?}")),
    }
}
