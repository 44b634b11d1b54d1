use thiserror::Error;

use crate::scenario::{Diagnostic, LoadError};

/// Failure of a CLI verb, mapped onto a stable exit code.
#[derive(Debug, Clone, Error)]
pub enum CliError {
    #[error("{}", render(.0))]
    Validation(Vec<Diagnostic>),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("integration aborted: {0}")]
    Abort(String),
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Abort(_) => 4,
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(msg) => CliError::Io(msg),
            LoadError::Invalid(d) => CliError::Validation(d),
        }
    }
}
