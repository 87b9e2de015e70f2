use thiserror::Error;

/// Invalid model data: bad meshes, non-physical constants, malformed scenarios.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("layer list is empty")]
    NoLayers,
    #[error("column needs at least one element, got {0} nodes")]
    TooFewNodes(usize),
    #[error("nodes must be strictly increasing (node {index} at {depth} m)")]
    NonIncreasingNodes { index: usize, depth: f64 },
    #[error("first node must sit at depth 0, got {0}")]
    SurfaceNotAtZero(f64),
    #[error("{name} has length {got}, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{name}[{index}] = {value} must be strictly positive and finite")]
    NonPositive {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
}
