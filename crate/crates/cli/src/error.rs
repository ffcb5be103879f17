use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Spec file could not be parsed or failed validation.
    #[error("{0}")]
    Spec(String),

    #[error(transparent)]
    Core(#[from] lqf_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// domain errors, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) => 2,
            CliError::Core(lqf_core::Error::Config(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
