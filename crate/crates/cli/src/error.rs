use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] locobs_core::Error),

    /// A well-posed run whose answer is negative (not observable, singular
    /// gramian, infeasible constraints).
    #[error("{0}")]
    Negative(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use locobs_core::Error as E;
        match self {
            CliError::Negative(_) => 2,
            CliError::Core(E::GramianSingular(_) | E::Infeasible(_)) => 2,
            _ => 1,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
