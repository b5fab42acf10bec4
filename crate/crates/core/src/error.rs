use thiserror::Error;

/// Everything that can go wrong inside the lab.
///
/// The variants line up with the CLI exit codes: configuration and precondition
/// problems are usage errors, resource limits and degenerate distributions have
/// their own codes, and a failed theorem check is an invariant violation.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid machine configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration of 2^{length} programs exceeds the cap 2^{cap} (set HALTLAB_ENUM_CAP to override)")]
    EnumerationCap { length: u32, cap: u32 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("degenerate runtime distribution: {0}")]
    Degenerate(String),

    #[error("conditional probability undefined: conditioning set is empty ({0})")]
    UndefinedConditional(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
