//! Error type mapping every failure onto the tool's two non-zero exit
//! codes: 2 for validation problems, 3 for numerical failures.

use conlab::analysis::AnalysisError;
use conlab::decomposition::DecompositionError;
use conlab::dynamics::DynamicsError;
use conlab::graph::GraphError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(err: GraphError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<DecompositionError> for CliError {
    fn from(err: DecompositionError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(err: DynamicsError) -> Self {
        match err {
            DynamicsError::NonFinite { .. } => CliError::Numerical(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(err: AnalysisError) -> Self {
        match err {
            AnalysisError::HorizonExceeded { .. } => CliError::Validation(err.to_string()),
            AnalysisError::Decomposition(inner) => CliError::from(inner),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
