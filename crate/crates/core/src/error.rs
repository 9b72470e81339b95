use thiserror::Error;

use crate::nodes::NodeSet;

/// Errors raised by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown variable in set (mask {0:#x})")]
    UnknownVariable(u64),

    #[error("duplicate variable {0}")]
    DuplicateVariable(String),

    #[error("table has {entries} entries, cap is {cap}")]
    SizeCap { entries: u128, cap: usize },

    #[error("table length {got} does not match alphabet product {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("negative probability {value} at entry {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("distribution sums to {0}, expected 1")]
    NotNormalized(f64),

    #[error("argument sets overlap")]
    OverlappingSets,

    #[error("too many nodes: {got} (cap {cap})")]
    TooManyNodes { got: usize, cap: usize },

    #[error("receiver {receiver} lies inside the cut set {cut}")]
    ReceiverInCut { receiver: usize, cut: NodeSet },

    #[error("field size {0} is not prime")]
    NotPrime(u32),

    #[error("network is not deterministic")]
    NotDeterministic,

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid coding choice: {0}")]
    InvalidCoding(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("negative rate {rate} at node {node}")]
    NegativeRate { node: usize, rate: f64 },

    #[error("source set is empty")]
    EmptySourceSet,

    #[error("invalid ordered partition: {0}")]
    BadPartition(String),

    #[error("dimension {got} exceeds cap {cap}")]
    DimensionCap { got: usize, cap: usize },

    #[error("invalid schedule parameters: {0}")]
    Schedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
