//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event ({x},{y}) outside sensor resolution {width}x{height}")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: u32,
        height: u32,
    },

    #[error("timestamp {new} us decreases below previous {prev} us")]
    NonMonotonicTimestamp { prev: u64, new: u64 },

    #[error("block index {index} out of range (surface has {count} blocks)")]
    InvalidBlockIndex { index: usize, count: usize },

    #[error("{context}: expected dimension {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("pseudo-coordinate ({u}, {v}) outside [0,1]^2")]
    PseudoCoordOutOfRange { u: f64, v: f64 },

    #[error("empty graph: no pose estimate")]
    NoEstimate,

    #[error("no visible joints in ground truth")]
    NoVisibleJoints,

    #[error("missing torso joint {0}")]
    MissingTorsoJoint(&'static str),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("backward called without a cached forward pass")]
    MissingForwardCache,

    #[error("pipeline stage '{stage}' failed: {msg}")]
    StageFailed { stage: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
