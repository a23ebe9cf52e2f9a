use thiserror::Error;

/// Errors produced by the channel, optimization and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("degenerate distance: link length must be positive (got {0} m)")]
    DegenerateDistance(f64),
    #[error("degenerate channel: zero-magnitude entry at element {0}")]
    DegenerateChannel(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular channel: Gram condition {condition:e} exceeds limit {limit:e}")]
    SingularChannel { condition: f64, limit: f64 },
    #[error("noise power must be positive (got {0})")]
    InvalidNoise(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid association: {0}")]
    InvalidAssociation(String),
    #[error("exhaustive search over {0} pairs exceeds the factorial guard of 9")]
    TooLarge(usize),
    #[error("trial {trial} failed after {redraws} geometry re-draws")]
    TrialFailed { trial: u64, redraws: usize },
    #[error("invalid config field `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("config parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
