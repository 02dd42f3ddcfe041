use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VlsmError {
    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("resource limit exceeded: more than {cap} explored items (cap)")]
    ResourceLimit { cap: usize },

    #[error("cannot extract a constrained trace: step {index}: {reason}")]
    Extraction { index: usize, reason: String },

    #[error("ill-formed message dependencies: {0}")]
    IllFormedMessage(String),

    #[error("cannot lift step {step}: {reason}")]
    CannotLift { step: usize, reason: String },

    #[error("no constrained trace reaches the state: {0}")]
    NoTrace(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = VlsmError> = std::result::Result<T, E>;
