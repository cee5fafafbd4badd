use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] fockfit_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_path_to_error::Error<serde_json::Error>,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    NotConverged(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 1 usage or validation, 2 convergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(fockfit_core::Error::NotConverged)
            | Error::Core(fockfit_core::Error::TooManyFailedRefits { .. })
            | Error::NotConverged(_) => 2,
            Error::Io { .. } => 3,
            Error::Csv { source, .. } if source.is_io_error() => 3,
            _ => 1,
        }
    }
}
