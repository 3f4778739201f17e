//! Error type shared by every subsystem.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),

    #[error("invalid vertex: {0}")]
    InvalidVertex(String),

    #[error("invalid permutation word: {0}")]
    InvalidPermutation(String),

    #[error("explicit-scale cap exceeded: {needed} vertices requested, cap is {cap} (set PERCOLAB_MAX_VERTICES to raise it)")]
    ExplicitScaleExceeded { needed: u128, cap: u64 },

    #[error("ball too large: more than {cap} members")]
    BallTooLarge { cap: u64 },

    #[error("operation not supported for family {0}")]
    UnsupportedFamily(String),

    #[error("distance precondition violated: expected {expected}, found {found}")]
    InvalidDistance { expected: u32, found: u32 },

    #[error("infection state belongs to a different vertex domain")]
    DomainMismatch,

    #[error("round budget exceeded: process not stable after {0} rounds")]
    RoundBudgetExceeded(u32),

    #[error("estimated percolation probability never crosses 1/2 at this trial budget")]
    NoCrossing,

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("witness layer invalid: {0}")]
    WitnessLayerInvalid(String),

    #[error("trace inconsistent with rule: {0}")]
    TraceMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
