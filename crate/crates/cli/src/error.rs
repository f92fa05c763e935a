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

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: regnn::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{0} oracle check(s) failed")]
    OracleFailed(usize),
}

impl CliError {
    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.to_string(),
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

pub(crate) trait CoreContext<T> {
    fn context(self, what: &str) -> std::result::Result<T, CliError>;
}

impl<T> CoreContext<T> for regnn::Result<T> {
    fn context(self, what: &str) -> std::result::Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what.to_string(),
            source,
        })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
