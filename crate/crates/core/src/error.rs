use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input data (shapes, non-finite values, unknown ids).
    #[error("input error: {0}")]
    Input(String),

    /// An operation was invoked in a state that does not permit it.
    #[error("state error: {0}")]
    State(String),

    #[error("config error: field `{field}`: {constraint}")]
    Config { field: String, constraint: String },

    #[error("predictor failed at iteration {iter}: {message}")]
    Predictor { iter: u64, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} must be finite, got {value}")))
    }
}
