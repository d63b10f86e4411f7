use thiserror::Error;

/// Errors surfaced by scenario loading, configuration and experiment runs.
#[derive(Debug, Error)]
pub enum SimError {
    /// Malformed input line.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    /// A file references an entity that does not exist.
    #[error("reference error: {0}")]
    Reference(String),

    /// Invalid configuration value or combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Lookup of an absent vehicle.
    #[error("vehicle `{id}` is not present at t = {time} s")]
    Lookup { id: String, time: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        SimError::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
