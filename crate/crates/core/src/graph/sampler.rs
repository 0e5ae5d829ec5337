//! Seeded minibatch samplers over edges and labeled nodes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, EdgePartition, Graph};

/// How edge batches are assembled within one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    /// A seeded shuffle of the full edge list, chopped into batches.
    UniformShuffle,
    /// Batches grow around a random seed edge by greedily pulling in
    /// unvisited edges incident to nodes already in the batch, falling back
    /// to fresh seed edges when the frontier is exhausted.
    Neighborhood,
}

impl std::str::FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform-shuffle" => Ok(SamplerMode::UniformShuffle),
            "neighborhood" => Ok(SamplerMode::Neighborhood),
            other => Err(Error::InvalidConfig(format!("unknown sampler mode {other:?}"))),
        }
    }
}

/// One edge of a minibatch, carrying everything the per-edge loss needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEdge {
    pub edge_index: usize,
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    pub kind: EdgeKind,
    /// Incident edge counts of the endpoints in the full graph.
    pub incident_u: usize,
    pub incident_v: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeBatch {
    pub edges: Vec<BatchEdge>,
}

fn batch_edge(graph: &Graph, labeled: &[bool], edge_index: usize) -> BatchEdge {
    let edge = graph.edge(edge_index);
    BatchEdge {
        edge_index,
        u: edge.u,
        v: edge.v,
        weight: edge.weight,
        kind: EdgePartition::kind_of(labeled, &edge),
        incident_u: graph.incident_count(edge.u),
        incident_v: graph.incident_count(edge.v),
    }
}

/// Produces the edge batches of one epoch. Every edge listed in
/// `edge_indices` appears in exactly one batch; an empty edge set yields an
/// empty stream.
pub fn sample_edge_batches(
    graph: &Graph,
    labeled: &[bool],
    edge_indices: &[usize],
    batch_size: usize,
    mode: SamplerMode,
    seed: u64,
) -> Result<Vec<EdgeBatch>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    if labeled.len() != graph.n_nodes() {
        return Err(Error::Shape(format!(
            "labeled mask length {} does not match node count {}",
            labeled.len(),
            graph.n_nodes()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = match mode {
        SamplerMode::UniformShuffle => {
            let mut order = edge_indices.to_vec();
            order.shuffle(&mut rng);
            order
        }
        SamplerMode::Neighborhood => neighborhood_order(graph, edge_indices, batch_size, &mut rng),
    };
    Ok(order
        .chunks(batch_size)
        .map(|chunk| EdgeBatch {
            edges: chunk.iter().map(|&e| batch_edge(graph, labeled, e)).collect(),
        })
        .collect())
}

/// Emits every edge once, ordered so that each batch_size-aligned run grows
/// around shared endpoints whenever the frontier allows it.
fn neighborhood_order(
    graph: &Graph,
    edge_indices: &[usize],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut in_scope = vec![false; graph.n_edges()];
    for &e in edge_indices {
        in_scope[e] = true;
    }
    let mut unvisited = edge_indices.to_vec();
    unvisited.shuffle(rng);
    let mut visited = vec![false; graph.n_edges()];
    let mut order = Vec::with_capacity(edge_indices.len());
    let mut cursor = 0usize;

    let take = |e: usize, visited: &mut Vec<bool>, order: &mut Vec<usize>| {
        visited[e] = true;
        order.push(e);
    };

    while order.len() < edge_indices.len() {
        // Start a batch from a fresh random seed edge.
        while cursor < unvisited.len() && visited[unvisited[cursor]] {
            cursor += 1;
        }
        if cursor >= unvisited.len() {
            break;
        }
        let seed_edge = unvisited[cursor];
        let mut batch_nodes = Vec::new();
        let push_nodes = |e: usize, nodes: &mut Vec<usize>| {
            let edge = graph.edge(e);
            for node in [edge.u, edge.v] {
                if !nodes.contains(&node) {
                    nodes.push(node);
                }
            }
        };
        take(seed_edge, &mut visited, &mut order);
        push_nodes(seed_edge, &mut batch_nodes);
        let mut in_batch = 1;

        while in_batch < batch_size && order.len() < edge_indices.len() {
            // First unvisited in-scope edge incident to the batch, scanning
            // batch nodes in insertion order.
            let next = batch_nodes
                .iter()
                .flat_map(|&node| graph.incident_edges(node))
                .find(|&e| in_scope[e] && !visited[e]);
            let e = match next {
                Some(e) => e,
                None => {
                    // Frontier exhausted: fall back to a fresh seed edge.
                    while cursor < unvisited.len() && visited[unvisited[cursor]] {
                        cursor += 1;
                    }
                    match unvisited.get(cursor) {
                        Some(&e) => e,
                        None => break,
                    }
                }
            };
            take(e, &mut visited, &mut order);
            push_nodes(e, &mut batch_nodes);
            in_batch += 1;
        }
    }
    order
}

/// Class-balanced minibatches over labeled nodes.
///
/// Each batch's class histogram deviates from a uniform split over the
/// present classes by at most one per class; minority classes are recycled
/// (sampled with replacement across the epoch) to fill their quota. The
/// epoch spans `ceil(n / batch_size)` batches with the final batch
/// truncated, so a single-class input reduces to a plain shuffle. Classes
/// with no instances are skipped with a warning.
pub fn class_balanced_batches(
    nodes: &[(usize, usize)],
    n_classes: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    for &(node, class) in nodes {
        if class >= n_classes {
            return Err(Error::InvalidLabel { label: class, n_classes });
        }
        let _ = node;
    }
    if nodes.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for &(node, class) in nodes {
        pools[class].push(node);
    }
    let mut present: Vec<usize> = Vec::new();
    for (class, pool) in pools.iter_mut().enumerate() {
        if pool.is_empty() {
            log::warn!("class {class} has no labeled instances; excluded from balancing");
        } else {
            pool.shuffle(&mut rng);
            present.push(class);
        }
    }
    let mut positions = vec![0usize; n_classes];
    let mut draw = |class: usize, rng: &mut ChaCha8Rng| -> usize {
        let pool = &mut pools[class];
        if positions[class] == pool.len() {
            pool.shuffle(rng);
            positions[class] = 0;
        }
        let node = pool[positions[class]];
        positions[class] += 1;
        node
    };

    let total = nodes.len();
    let n_batches = total.div_ceil(batch_size);
    let mut batches = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let size = batch_size.min(total - b * batch_size);
        let base = size / present.len();
        let remainder = size % present.len();
        let mut batch = Vec::with_capacity(size);
        for (slot, &class) in present.iter().enumerate() {
            // Rotate which classes take the remainder so it spreads evenly.
            let extra = usize::from((slot + present.len() - b % present.len()) % present.len() < remainder);
            for _ in 0..base + extra {
                batch.push(draw(class, &mut rng));
            }
        }
        batch.shuffle(&mut rng);
        batches.push(batch);
    }
    Ok(batches)
}
