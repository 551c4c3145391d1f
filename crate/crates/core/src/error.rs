use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the transfer pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: file not found", path.display())]
    NotFound { path: PathBuf },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: unsupported format", path.display())]
    UnsupportedFormat { path: PathBuf },

    #[error("{}: corrupt data: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },

    #[error("{}: bad .flo magic number {found}", path.display())]
    BadFloMagic { path: PathBuf, found: f32 },

    #[error("{}: truncated payload, expected {expected} bytes, found {found}", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{}: nonpositive dimensions {width}x{height}", path.display())]
    NonPositiveDimensions {
        path: PathBuf,
        width: i64,
        height: i64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Coarse classification of an [`Error`], used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Dimension,
    Config,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotFound { .. }
            | Error::Io { .. }
            | Error::UnsupportedFormat { .. }
            | Error::Corrupt { .. }
            | Error::BadFloMagic { .. }
            | Error::Truncated { .. }
            | Error::NonPositiveDimensions { .. } => ErrorKind::Io,
            Error::DimensionMismatch(_) => ErrorKind::Dimension,
            Error::InvalidInput(_) | Error::InvalidConfig(_) => ErrorKind::Config,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound { path }
        } else {
            Error::Io { path, source }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
