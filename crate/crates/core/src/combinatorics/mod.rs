//! Connected-graph sums, spanning-tree counts and (signed) ordered trees.

mod graph;
mod trees;

pub use graph::{
    count_trees_with_degrees, phi, phi_with, spanning_tree_count, spanning_tree_count_enumerated, PhiMode,
    SimpleGraph, PHI_MAX_VERTICES,
};
pub use trees::{
    enumerate_ordered_trees, enumerate_signed_ordered_trees, labeled_trees, ordered_tree_count, prufer_decode,
    sample_ordered_tree, sample_signed_ordered_tree, OrderedTree, SignedOrderedTree, ENUMERATION_MAX,
};
