use std::path::Path;

use thiserror::Error;
use vibsim_core::Error as CoreError;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Unphysical { .. }
            | CoreError::Singular(_)
            | CoreError::Unconverged { .. }
            | CoreError::CutoffTooSmall { .. }
            | CoreError::NoConvergence { .. } => CliError::Convergence(err.to_string()),
            _ => CliError::Input(err.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
