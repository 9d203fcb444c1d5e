use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the library and mapped to process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Data(String),
    #[error("non-finite value at epoch {epoch}, batch {batch}: {source}")]
    Training { epoch: usize, batch: usize, source: vtirt_core::Error },
    #[error(transparent)]
    Model(#[from] vtirt_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Data(_) => 3,
            Error::Training { .. } => 4,
            Error::Model(e) => match e {
                vtirt_core::Error::NonFinite { .. } | vtirt_core::Error::InvalidPotential { .. } => 4,
                vtirt_core::Error::InvalidConfig(_) | vtirt_core::Error::WrongVariant { .. } => 2,
                _ => 3,
            },
        }
    }
}
