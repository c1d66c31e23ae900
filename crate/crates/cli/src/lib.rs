//! Scenario runner for `avgnet`: JSON configs in, CSV trajectories and JSON
//! reports out.

pub mod config;
pub mod output;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use config::{ConfigError, ScenarioConfig};
pub use scenario::{execute, Execution, Outcome};
pub use sweep::{sweep, SweepAxis, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] avgnet::Error),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit code: 2 for rejected input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Json(_) => 2,
            _ => 1,
        }
    }
}
