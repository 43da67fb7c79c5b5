use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    /// The incentive constraint cannot be met by any action in the admissible range.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("slot index {index} out of range 1..={count}")]
    SlotIndex { index: usize, count: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
