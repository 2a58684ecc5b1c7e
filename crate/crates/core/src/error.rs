use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("segmenter timed out after {0} ms")]
    SegmenterTimeout(u64),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("worker down: {0}")]
    WorkerDown(String),

    #[error("unrepresentable: {0}")]
    Unrepresentable(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Whether a segmenter call failing with this error may be retried.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::SegmenterTimeout(_) | Error::Protocol(_) | Error::WorkerDown(_)
        )
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Config(_) => 2,
            Error::SegmenterTimeout(_) | Error::Protocol(_) | Error::WorkerDown(_) => 3,
            Error::Io { .. } | Error::Image { .. } => 4,
            Error::Unrepresentable(_) => 5,
        }
    }
}
