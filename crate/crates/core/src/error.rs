use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the documented domain of the operation.
    #[error("invalid input: {0}")]
    Input(String),

    /// The model does not satisfy a requirement of the requested operation.
    #[error("unsupported model: {0}")]
    Unsupported(String),

    /// A configuration key is unknown, missing or violates a model assumption.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Quadrature or an iterative solver failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A solver produced a state that violates one of its own invariants.
    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
