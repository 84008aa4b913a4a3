use jacksonnet::algebra::AlgebraError;
use jacksonnet::network::NetworkError;
use jacksonnet::sim::SimError;
use thiserror::Error;

/// Exit code 2 for usage problems (arguments, unreadable or malformed
/// config), 1 for validation and statistical failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("csv inputs do not cover the same (alpha, beta, omega) keys: {0}")]
    KeyMismatch(String),
    #[error("malformed csv at line {line}: {message}")]
    Csv { line: usize, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Io(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
