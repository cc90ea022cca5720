use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("horizon mismatch: expected {expected} time steps, got {actual}")]
    HorizonMismatch { expected: usize, actual: usize },

    #[error("time step {t} out of range 1..={horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },

    #[error("invalid policy configuration: {0}")]
    PolicyConfig(String),

    #[error("policy state: {0}")]
    PolicyState(String),

    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("reference oracle infeasible: {experts} experts exceeds cap {cap}")]
    OracleInfeasible { experts: u128, cap: usize },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("infeasible allocation: {0}")]
    Allocation(String),

    #[error("invalid reward matrix: {0}")]
    RewardMatrix(String),

    #[error("scenario config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("`{0}` is neither a builtin scenario nor a readable file")]
    UnknownScenario(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input configuration rather than a
    /// failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::UnknownScenario(_)
                | Error::Json(_)
                | Error::Partition(_)
                | Error::PolicyConfig(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
