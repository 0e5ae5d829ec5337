//! Undirected weighted graphs and edge partitioning by label status.

mod features;
mod knn;
mod sampler;
mod sbm;

pub use features::{adjacency_features, NodeFeatures};
pub use knn::knn_graph;
pub use sampler::{class_balanced_batches, sample_edge_batches, BatchEdge, EdgeBatch, SamplerMode};
pub use sbm::{sbm_generate, SbmConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One undirected edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected weighted graph with no self-loops and at most one edge per
/// unordered node pair.
#[derive(Debug, Clone)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<Edge>,
    /// Per node: `(neighbor, edge index)` in insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    pub fn new(n_nodes: usize) -> Self {
        Self { n_nodes, edges: Vec::new(), adjacency: vec![Vec::new(); n_nodes] }
    }

    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut graph = Self::new(n_nodes);
        for (u, v, w) in edges {
            graph.add_edge(u, v, w)?;
        }
        Ok(graph)
    }

    /// Adds an undirected edge. Weight must be finite and nonnegative
    /// (use 1.0 for unweighted graphs).
    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<()> {
        if u >= self.n_nodes {
            return Err(Error::NodeOutOfRange { id: u, n_nodes: self.n_nodes });
        }
        if v >= self.n_nodes {
            return Err(Error::NodeOutOfRange { id: v, n_nodes: self.n_nodes });
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::BadWeight { u, v, weight });
        }
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        // Scan the smaller adjacency list for a duplicate.
        let (probe, other) = if self.adjacency[u].len() <= self.adjacency[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        if self.adjacency[probe].iter().any(|&(n, _)| n == other) {
            return Err(Error::DuplicateEdge(u, v));
        }
        let idx = self.edges.len();
        self.edges.push(Edge { u, v, weight });
        self.adjacency[u].push((v, idx));
        self.adjacency[v].push((u, idx));
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> Edge {
        self.edges[index]
    }

    /// Neighbors of `u` as `(neighbor, weight)`, in insertion order.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[u].iter().map(move |&(n, e)| (n, self.edges[e].weight))
    }

    /// Edge indices incident to `u`.
    pub fn incident_edges(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[u].iter().map(|&(_, e)| e)
    }

    /// Number of edges touching `u`.
    pub fn incident_count(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    /// Sum of incident edge weights at `u`.
    pub fn weighted_degree(&self, u: usize) -> f64 {
        self.adjacency[u].iter().map(|&(_, e)| self.edges[e].weight).sum()
    }
}

/// Which label classes an edge's endpoints fall into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    LabeledLabeled,
    LabeledUnlabeled,
    UnlabeledUnlabeled,
}

/// Disjoint split of the edge set by endpoint label status. Entries are
/// indices into [`Graph::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePartition {
    pub ll: Vec<usize>,
    pub lu: Vec<usize>,
    pub uu: Vec<usize>,
}

impl EdgePartition {
    pub fn total(&self) -> usize {
        self.ll.len() + self.lu.len() + self.uu.len()
    }

    pub fn kind_of(labeled: &[bool], edge: &Edge) -> EdgeKind {
        match (labeled[edge.u], labeled[edge.v]) {
            (true, true) => EdgeKind::LabeledLabeled,
            (false, false) => EdgeKind::UnlabeledUnlabeled,
            _ => EdgeKind::LabeledUnlabeled,
        }
    }
}

/// Splits the edge set into labeled-labeled, labeled-unlabeled, and
/// unlabeled-unlabeled lists.
pub fn partition_edges(graph: &Graph, labeled: &[bool]) -> Result<EdgePartition> {
    if labeled.len() != graph.n_nodes() {
        return Err(Error::Shape(format!(
            "labeled mask length {} does not match node count {}",
            labeled.len(),
            graph.n_nodes()
        )));
    }
    let mut partition =
        EdgePartition { ll: Vec::new(), lu: Vec::new(), uu: Vec::new() };
    for (idx, edge) in graph.edges().iter().enumerate() {
        match EdgePartition::kind_of(labeled, edge) {
            EdgeKind::LabeledLabeled => partition.ll.push(idx),
            EdgeKind::LabeledUnlabeled => partition.lu.push(idx),
            EdgeKind::UnlabeledUnlabeled => partition.uu.push(idx),
        }
    }
    Ok(partition)
}
