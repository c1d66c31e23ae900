//! Distributed averaging over time-varying network topologies.
//!
//! Nodes hold scalar values and repeatedly replace them by weighted
//! combinations of their neighbours' values, `x(k+1) = A(k) x(k)`, where each
//! `A(k)` is doubly stochastic with a positive diagonal and every positive
//! entry bounded below by `eta`. The crate provides:
//!
//! - [`graph`]: graph snapshots, topology sequences, and the window
//!   connectivity / cut-crossing checkers.
//! - [`weights`]: weight matrices, their validation, Gram weights, and the
//!   standard constructions (equal-neighbour, circulant, random Birkhoff).
//! - [`lyapunov`]: the sample variance `V`, the min-anchored variance `V̲`,
//!   and the exact decrease identities relating them to the weights.
//! - [`engine`]: the unquantized iteration with trajectory recording and
//!   per-window assumption audits.
//! - [`balancing`]: the offer/accept load-balancing protocol on undirected
//!   graphs and the doubly stochastic matrix it implies.
//! - [`quantized`]: the floor-quantized iteration, its termination and
//!   drift accounting, and the complete-subgraph converse construction.

pub mod balancing;
pub mod engine;
pub mod error;
pub mod graph;
pub mod lyapunov;
pub mod quantized;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
pub use graph::{GraphSnapshot, TopologySequence};
pub use lyapunov::NodeVector;
pub use weights::{GramMatrix, WeightMatrix};
