use std::path::PathBuf;

use thiserror::Error;

use crate::theorizing::{Regime, TheoryType};

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its type invariant.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient published trials in cell ({regime}, {theory_type})")]
    EmptyCell {
        regime: Regime,
        theory_type: TheoryType,
    },

    #[error("enumeration budget exceeded: {required} noise vectors required, limit is {limit}")]
    Budget { required: f64, limit: f64 },

    #[error("malformed configuration document: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
