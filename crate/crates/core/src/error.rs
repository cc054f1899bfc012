// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use crate::fairness::ItemId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    /// A fairness or parameter bound was violated (e.g. `tau > K / |groups|`).
    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("recommendation list already holds {k} items")]
    ListFull { k: usize },

    #[error("provider failed on item {item}: {message}")]
    Provider { item: ItemId, message: String },

    #[error("fallback gave up after {draws} uniform draws")]
    FallbackExhausted { draws: u64 },

    #[error("users with fewer than 2 interactions: {0:?}")]
    TooFewInteractions(Vec<u64>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Constraint(_) => 3,
            _ => 1,
        }
    }
}
