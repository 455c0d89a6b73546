use pgsm::PgsmError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration at '{key}': {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Engine(#[from] PgsmError),

    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config { .. } => "config",
            Self::Engine(PgsmError::Input(_)) => "input",
            Self::Engine(PgsmError::TooLarge { .. }) => "too_large",
            Self::Engine(PgsmError::Numerical(_)) => "numerical",
            Self::Engine(_) => "internal",
            Self::Io { .. } => "io",
            Self::CheckFailed(_) => "check_failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Engine(PgsmError::Input(_)) | Self::Engine(PgsmError::TooLarge { .. }) => 2,
            Self::CheckFailed(_) => 3,
            _ => 1,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let key = match self {
            Self::Config { key, .. } => Some(key.as_str()),
            _ => None,
        };
        json!({
            "error": self.kind(),
            "key": key,
            "message": self.to_string(),
        })
    }
}
