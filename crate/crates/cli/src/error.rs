use std::path::Path;

/// Failures surfaced by the command line. Every variant maps to a short
/// category printed as `error[category]: message`.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] stratseir::Error),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Model(e) => e.category(),
            CliError::Input { .. } => "input",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
        }
    }

    pub fn input(path: &Path, message: impl Into<String>) -> Self {
        CliError::Input {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
