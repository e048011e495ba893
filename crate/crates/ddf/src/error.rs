use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or invalid input, located by field path.
    #[error("{}{field}: {message}", file.as_ref().map(|f| format!("{}: ", f.display())).unwrap_or_default())]
    Field { file: Option<PathBuf>, field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ddf_core::Error),
    /// An invariant check ran and did not hold.
    #[error("check failed: {0}")]
    Check(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Usage and input errors.
pub const EXIT_USAGE: i32 = 1;
/// Numerical or consistency failures.
pub const EXIT_FAILURE: i32 = 2;

impl Error {
    pub fn field(field: &str, message: String) -> Self {
        Error::Field { file: None, field: field.to_string(), message }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            Error::Field { file: None, field, message } => Error::Field { file: Some(path.to_path_buf()), field, message },
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Field { .. } | Error::Io { .. } | Error::Usage(_) => EXIT_USAGE,
            Error::Csv(_) | Error::Core(_) | Error::Check(_) => EXIT_FAILURE,
        }
    }
}
