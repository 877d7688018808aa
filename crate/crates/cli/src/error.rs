use pmm_core::PmmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Args(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Args(_) => 2,
            Self::Data(_) => 3,
            Self::Fit(_) => 4,
        }
    }
}

impl From<PmmError> for CliError {
    fn from(e: PmmError) -> Self {
        match e {
            PmmError::InputTooShort { .. } | PmmError::LengthMismatch { .. } => {
                Self::Data(e.to_string())
            }
            PmmError::InvalidOrder(_) | PmmError::InvalidArgument(_) => Self::Args(e.to_string()),
            _ => Self::Fit(e.to_string()),
        }
    }
}

/// Errors raised while fitting: everything except short input is a fit failure.
pub fn fit_error(e: PmmError) -> CliError {
    match e {
        PmmError::InputTooShort { .. } | PmmError::LengthMismatch { .. } => {
            CliError::Data(e.to_string())
        }
        _ => CliError::Fit(e.to_string()),
    }
}

pub type CliResult<T> = Result<T, CliError>;
