use thiserror::Error;

/// Errors raised by the numerical layers of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has dim {left}, expected {right}")]
    DimensionMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("filter must have at least one tap")]
    EmptyTaps,

    #[error("invalid channel matrix: {0}")]
    InvalidChannel(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid REGNN configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },

    #[error("forward tape does not match parameters: {0}")]
    TapeMismatch(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("network generation failed: {0}")]
    Generation(String),

    #[error("brute-force search limited to m <= {max}, got m = {m}")]
    TooLarge { m: usize, max: usize },

    #[error("non-finite update at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
