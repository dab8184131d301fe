use std::io;

/// Harness errors, each tied to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Exit code 3.
    #[error("input error: {0}")]
    Input(String),
    /// Exit code 4.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) | CliError::Io { .. } => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

impl From<treekv_core::Error> for CliError {
    fn from(e: treekv_core::Error) -> Self {
        use treekv_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) => CliError::Config(msg),
            E::Dimension(_) | E::Ordering(_) | E::Input(_) | E::Level(_) | E::Selector(_) => CliError::Input(msg),
            E::State(_) | E::Invariant(_) => CliError::Internal(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("malformed JSON: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
