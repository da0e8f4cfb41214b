//! Correspondence generation and outlier pruning.

mod clique;
mod correspond;
mod graph;

pub use clique::{max_clique, prune, CliqueResult};
pub use correspond::{init_correspondences, quadric_similarity, Correspondence};
pub use graph::{build_graphs, invariant_distance, BitSet, CompatibilityGraph};
