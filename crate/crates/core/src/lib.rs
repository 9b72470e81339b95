//! Feasibility analysis for multicasting correlated sources over discrete
//! memoryless cooperative networks.
//!
//! The crate evaluates cut-based sufficient conditions built on joint
//! source / Wyner-Ziv encoding with sliding-window decoding, the
//! compress-and-forward rate regions that follow from them (multicast,
//! relay, two-way relay, scalar Gaussian), and mechanically checks the
//! ordered-partition geometry and block-Markov bookkeeping behind them.
//!
//! Information quantities are exact functionals of dense joint tables, in
//! bits.

pub mod cli;
pub mod cuts;
pub mod error;
pub mod gaussian;
pub mod gf;
pub mod network;
pub mod nodes;
pub mod partition;
pub mod pmf;
pub mod schedule;
pub mod search;

pub use error::{Error, Result};
pub use network::{assemble_channel_joint, assemble_joint, validate, CodingChoice, CooperativeNetwork, LinearFf, NetworkKind, Quantizer, SourceModel, Violation};
pub use nodes::NodeSet;
pub use pmf::{JointPmf, Role, VarId, VarSet};
