use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact subroutine was asked to handle more elements than it supports.
    #[error("{what}: size {got} exceeds the supported bound {limit}")]
    SizeLimit {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("lp backend failure: {0}")]
    Lp(String),

    #[error("cut emitted twice: {0}")]
    DuplicateCut(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
