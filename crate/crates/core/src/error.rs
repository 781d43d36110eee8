use std::io;

use thiserror::Error;

/// Errors surfaced by the simulator, controllers and scenario loader.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or controller parameter violates its constraint.
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: String, reason: String },

    /// A runtime input (arrivals, time step, rate) is out of domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed scenario document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    /// A simulation invariant was breached. Always a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Parse(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
