use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("elliptic integral diverges: {0}")]
    Divergence(String),

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("requested accuracy not reached: {0}")]
    Accuracy(String),

    #[error("initial condition inconsistent with case: {0}")]
    InconsistentIc(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("no trajectory exists: {0}")]
    NonExistent(String),

    #[error("invalid input: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
