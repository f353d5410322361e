use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed JSON or a schema violation caught while decoding.
    #[error("{field} (line {line}, column {column}): {message}")]
    Schema {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    /// A decoded value that is out of range or refers to something missing.
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Model(#[from] gridrouter::Error),
    #[error("{0}")]
    Usage(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
