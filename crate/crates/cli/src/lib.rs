//! Command-line front end: configuration, subcommand dispatch and output files.

pub mod config;
pub mod output;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Some validation checks failed.
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("physics error: {0}")]
    Physics(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("resource error: {0}")]
    Resource(String),
}

impl CliError {
    /// 0 success, 1 validation failure, 2 schema, 3 physics, 4 environment.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Io(_) | CliError::Resource(_) => 4,
        }
    }
}

impl From<dipole_bounds::Error> for CliError {
    fn from(e: dipole_bounds::Error) -> Self {
        use dipole_bounds::Error as E;
        match e {
            E::Config(_) | E::Geometry(_) => CliError::Schema(e.to_string()),
            E::Resource(_) => CliError::Resource(e.to_string()),
            _ => CliError::Physics(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
