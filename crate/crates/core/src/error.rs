use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IlimError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition on the parameters does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An enumeration outgrew its node budget.
    #[error("resource cap exceeded: {what} needs more than {cap} nodes")]
    ResourceCap { what: &'static str, cap: usize },

    /// Two points of different inverse limits, or of different depths, were combined.
    #[error("mismatch: {0}")]
    Mismatch(String),

    /// A point was asked for a coordinate deeper than it stores.
    #[error("depth {requested} exceeds stored depth {available}")]
    Depth { requested: usize, available: usize },

    #[error("invalid renormalization tower: {0}")]
    InvalidTower(String),

    #[error("inconsistent orbit partition: {0}")]
    InconsistentOrbits(String),
}

pub type Result<T> = std::result::Result<T, IlimError>;
