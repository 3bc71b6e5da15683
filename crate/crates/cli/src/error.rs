use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0} monitor violation(s)")]
    Monitor(usize),
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Monitor(_) => 4,
            // Unwritable output is a setup problem, not a solver one.
            CliError::Io { .. } => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), msg: e.to_string() }
    }
}

impl From<cavsim_core::Error> for CliError {
    fn from(e: cavsim_core::Error) -> Self {
        use cavsim_core::Error as E;
        match e {
            E::Config(_) | E::InvalidInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
