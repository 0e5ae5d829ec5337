//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by graph construction, training, propagation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A hyperparameter or structural configuration is invalid.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Vector or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A class label is outside `[0, n_classes)`.
    #[error("label {label} out of range for {n_classes} classes")]
    InvalidLabel { label: usize, n_classes: usize },

    /// Graph edits that violate the edge-list invariants.
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("negative or non-finite weight {weight} on edge ({u}, {v})")]
    BadWeight { u: usize, v: usize, weight: f64 },
    #[error("node id {id} out of range for {n_nodes} nodes")]
    NodeOutOfRange { id: usize, n_nodes: usize },

    /// An embedding row cannot be used for cosine similarity.
    #[error("embedding row {0} has zero norm")]
    InvalidEmbedding(usize),

    /// Inconsistent or missing data (features, labels, splits).
    #[error("data error: {0}")]
    Data(String),

    /// A non-finite value surfaced during numeric work.
    #[error("numeric fault: {0}")]
    NumericFault(String),

    /// An iterative solver ran out of iterations.
    #[error("did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    /// The linear system handed to the direct solver is singular.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
