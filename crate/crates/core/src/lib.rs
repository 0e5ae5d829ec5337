//! Semi-supervised node classification toolkit.
//!
//! Trains dense feed-forward networks with a graph-regularized objective:
//! the usual supervised cost plus per-edge penalties on the distance
//! between hidden representations of connected nodes, split by whether the
//! edge joins labeled or unlabeled endpoints. A classical label-propagation
//! solver, graph/feature construction helpers, edge samplers, a synthetic
//! block-model generator, and evaluation metrics round out the toolkit.
//!
//! Modules:
//! - [`nn`] — feed-forward networks, losses, backprop, SGD, and a
//!   finite-difference gradient oracle.
//! - [`graph`] — graph storage, edge partitioning by label status, feature
//!   builders (adjacency rows, cosine kNN), samplers, block-model generator.
//! - [`labelprop`] — the quadratic label-propagation objective with a
//!   Jacobi solver and a dense direct solver for cross-checking.
//! - [`trainer`] — the graph-regularized training objective in both its
//!   node-sum and edge-decomposed forms, the stochastic edge-minibatch
//!   training loop, and self-training.
//! - [`metrics`] — Macro/Micro F1, accuracy, mean reciprocal rank.
//! - [`io`] — TSV/JSON/text file formats shared with the CLI.

pub mod error;
pub mod graph;
pub mod io;
pub mod labelprop;
pub mod metrics;
pub mod nn;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{
    adjacency_features, class_balanced_batches, knn_graph, partition_edges, sample_edge_batches,
    sbm_generate, BatchEdge, Edge, EdgeBatch, EdgeKind, EdgePartition, Graph, NodeFeatures,
    SamplerMode, SbmConfig,
};
pub use labelprop::{
    direct_solve, jacobi_propagate, lp_objective, lp_predict, LpConfig, Propagation,
};
pub use metrics::{accuracy, f1_scores, mrr, ClassScores, EvalReport};
pub use nn::{
    Activation, CompositeLoss, DistanceMetric, ModelParams, ReprLayer, Sgd, Target,
};
pub use trainer::{
    edge_decomposed_objective, full_objective, predict, self_train, supervised_cost, train,
    NgmConfig, TrainHistory,
};

/// Derives an independent stream seed from a base seed, splitmix64-style.
///
/// The trainer uses `derive_seed(seed, epoch)` for its per-epoch samplers;
/// exposing the derivation lets reference loops reproduce trajectories.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
