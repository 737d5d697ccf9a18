use elastic_market_core::Error as CoreError;
use thiserror::Error;

/// Failures surfaced by the command line, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{0}")]
    Solver(CoreError),
    #[error("bound violated: {0}")]
    BoundViolation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 1 for solver failures, 2 for bad input, 3 for a violated bound.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(CoreError::NonConvergence { .. } | CoreError::Degenerate(_)) => 1,
            CliError::BoundViolation(_) => 3,
            _ => 2,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { .. } => CliError::Validation(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}
