//! Robust node classification with random-walk negative sampling.
//!
//! The pipeline layers non-neighbors of every node by hop distance, ranks
//! them with a mix of random-walk-with-restart and PageRank scores, draws a
//! diverse subset through a k-DPP, and trains a two-branch GCN that
//! subtracts the aggregated negatives from the usual neighborhood signal.

pub mod attacks;
pub mod datasets;
pub mod dpp;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod sparse;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{Edge, Graph, LinearOperator, OperatorKind};
