use thiserror::Error;

use airgap_core::agents::AgentError;
use airgap_core::envgen::GenerateError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible environment: {0}")]
    Infeasible(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("resume mismatch: {0}")]
    ResumeMismatch(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Transport(_) => 4,
            CliError::ResumeMismatch(_) => 5,
            CliError::Checkpoint(_) | CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> Self {
        match e {
            GenerateError::InvalidConfig(errs) => crate::config::env_errors(errs),
            e @ GenerateError::PlacementInfeasible { .. } => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Generate(g) => g.into(),
            AgentError::TemplateMismatch => CliError::ResumeMismatch(e.to_string()),
            AgentError::InvalidConfig(_) => CliError::Config(e.to_string()),
            e => CliError::Other(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv: {e}"))
    }
}
