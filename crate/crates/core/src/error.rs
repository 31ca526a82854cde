use thiserror::Error;

use crate::network::Node;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("topology needs at least one anchor and one target (got {anchors} anchors, {targets} targets)")]
    EmptyNetwork { anchors: usize, targets: usize },

    #[error("{node} at ({x}, {y}) lies outside the area of interest")]
    OutsideAoi { node: Node, x: f64, y: f64 },

    #[error("invalid area of interest: {0}")]
    InvalidAoi(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coincident nodes {from} and target {target}: distance is zero")]
    CoincidentNodes { from: Node, target: usize },

    #[error("target {0} has no measurements")]
    DegenerateTarget(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite cost at iteration {iteration} of the least-squares refinement")]
    NonFiniteCost { iteration: usize },

    #[error("run failed ({context}, run seed {seed}): {source}")]
    RunFailed {
        context: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
