use std::path::PathBuf;

/// Problems with the run configuration. These map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("config does not parse: {0}")]
    Parse(String),

    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// Failures while running a task. These map to exit code 3.
#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error(transparent)]
    Core(#[from] lrising_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("missing input {0}; run the producing subcommand first")]
    MissingInput(PathBuf),

    #[error("malformed input {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("{0}")]
    Other(String),
}

impl TaskError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TaskError::Io { path: path.into(), source }
    }

    pub fn malformed(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        TaskError::Malformed { path: path.into(), message: message.to_string() }
    }
}

pub type TaskResult<T> = Result<T, TaskError>;
