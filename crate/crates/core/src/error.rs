use std::io;

use crate::persistence::StoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Service-level failure, one variant per caller-visible outcome.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("authentication required")]
    Unauthorized,

    #[error("token expired")]
    TokenExpired,

    #[error("forbidden: {0}")]
    Forbidden(String),

    #[error("{0} not found")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("content exceeds the {limit} byte limit")]
    TooLarge { limit: u64 },

    #[error("storage is full")]
    StorageFull,

    #[error("i/o failure: {0}")]
    Io(io::Error),

    #[error(transparent)]
    Store(#[from] StoreError),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Error::NotFound(what.into())
    }

    pub fn forbidden(why: impl Into<String>) -> Self {
        Error::Forbidden(why.into())
    }

    pub fn conflict(why: impl Into<String>) -> Self {
        Error::Conflict(why.into())
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        if err.kind() == io::ErrorKind::StorageFull {
            Error::StorageFull
        } else {
            Error::Io(err)
        }
    }
}

impl From<rusqlite::Error> for Error {
    fn from(err: rusqlite::Error) -> Self {
        Error::Store(StoreError::from(err))
    }
}
