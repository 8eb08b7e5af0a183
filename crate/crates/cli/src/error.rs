use std::path::PathBuf;

use swarm_symreg::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("missing input {}: {hint}", path.display())]
    Missing { path: PathBuf, hint: String },
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Missing { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Config(m),
            Error::Numerical(m) => CliError::Numerical(m),
            Error::Io(source) => CliError::Io { context: "i/o".into(), source },
            other => CliError::Input(other.to_string()),
        }
    }
}
