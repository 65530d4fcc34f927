use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("unknown experiment kind '{0}'")]
    UnknownKind(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// Process exit status. Assertion failures (1) are not errors.
    pub fn status(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::UnknownKind(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

/// Core failures during a run come from the config's data.
pub fn invalid<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}
