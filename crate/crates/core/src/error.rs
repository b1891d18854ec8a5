use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("exponent out of range: {0}")]
    OutOfRange(String),

    #[error("time step {dt:e} exceeds stable bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    #[error("non-finite update at node {node} (time {time:e})")]
    Divergence { node: usize, time: f64 },

    #[error("scheduling: {0}")]
    Scheduling(String),

    #[error("empty ball: {0}")]
    EmptyBall(String),

    #[error("setup: {0}")]
    Setup(String),

    #[error("internal consistency: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
