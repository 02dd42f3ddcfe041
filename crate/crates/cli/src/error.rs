use thiserror::Error;

use vlsmkit::VlsmError;

use crate::codec::DecodeError;

/// Errors that end a command. Verdicts (a failing check, detected
/// equivocators, a refuted equivalence) are not errors.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: DecodeError,
    },

    #[error(transparent)]
    Core(#[from] VlsmError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Decode { .. } => 2,
            CliError::Core(VlsmError::InvalidArgument(_) | VlsmError::UnknownLabel(_)) => 2,
            CliError::Core(VlsmError::PreconditionFailed(_)) => 4,
            CliError::Core(VlsmError::ResourceLimit { .. }) => 5,
            CliError::Core(_) => 1,
        }
    }
}
