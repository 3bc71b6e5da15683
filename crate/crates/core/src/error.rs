use thiserror::Error;

/// Failure modes shared by every solver and the coordinator.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("time {t} outside trajectory domain [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },
    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: String, residual: f64 },
    #[error("case not applicable: {0}")]
    CaseInapplicable(String),
    #[error("terminal-time window is empty: lower {lower} > upper {upper}")]
    InfeasibleWindow { lower: f64, upper: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unsupported constraint combination: {0}")]
    Unsupported(String),
    #[error("ill-conditioned system: {0}")]
    Conditioning(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
