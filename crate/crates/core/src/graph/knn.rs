//! k-nearest-neighbor graphs over embeddings under cosine similarity.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Builds a kNN graph: every node proposes its `k` most cosine-similar
/// distinct nodes with similarity strictly above `threshold`; proposals are
/// merged symmetrically (an edge exists if either endpoint proposed it).
///
/// Edge weight is the cosine similarity clamped to `[0, 1]`. Ties in
/// similarity break toward the lower node id. Proposal out-degree is at
/// most `k`; the merged degree of a node may exceed `k`.
pub fn knn_graph(embeddings: &[Vec<f64>], k: usize, threshold: f64) -> Result<Graph> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let n = embeddings.len();
    let dim = embeddings.first().map_or(0, |e| e.len());
    let mut norms = Vec::with_capacity(n);
    for (i, row) in embeddings.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Shape(format!(
                "embedding row {i} has length {} but row 0 has {dim}",
                row.len()
            )));
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidEmbedding(i));
        }
        norms.push(norm);
    }

    let cosine = |a: usize, b: usize| -> f64 {
        let dot: f64 = embeddings[a].iter().zip(&embeddings[b]).map(|(x, y)| x * y).sum();
        dot / (norms[a] * norms[b])
    };

    let mut graph = Graph::new(n);
    let mut proposed = vec![Vec::<usize>::new(); n];
    for i in 0..n {
        let mut candidates: Vec<(usize, f64)> =
            (0..n).filter(|&j| j != i).map(|j| (j, cosine(i, j))).collect();
        candidates.retain(|&(_, sim)| sim > threshold);
        // Highest similarity first; lower id wins ties.
        candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        proposed[i] = candidates.into_iter().take(k).map(|(j, _)| j).collect();
    }
    for i in 0..n {
        for &j in &proposed[i] {
            let (u, v) = (i.min(j), i.max(j));
            let weight = cosine(u, v).clamp(0.0, 1.0);
            match graph.add_edge(u, v, weight) {
                Ok(()) | Err(Error::DuplicateEdge(..)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn identical_unit_vectors_connect_with_weight_one() {
        let graph = knn_graph(&[vec![1.0, 0.0], vec![1.0, 0.0]], 1, 0.0).unwrap();
        assert_eq!(graph.n_edges(), 1);
        let edge = graph.edge(0);
        assert!((edge.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_vectors_stay_disconnected_at_zero_threshold() {
        // Similarity exactly 0 is not strictly above the 0 threshold.
        let graph = knn_graph(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1, 0.0).unwrap();
        assert_eq!(graph.n_edges(), 0);
    }

    #[test]
    fn zero_norm_row_is_rejected() {
        assert!(matches!(
            knn_graph(&[vec![1.0, 0.0], vec![0.0, 0.0]], 1, 0.0),
            Err(Error::InvalidEmbedding(1))
        ));
    }

    /// O(n^2) re-derivation with the same tie-breaking.
    fn brute_force_edges(embeddings: &[Vec<f64>], k: usize, threshold: f64) -> BTreeSet<(usize, usize)> {
        let n = embeddings.len();
        let norm = |r: &Vec<f64>| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norms: Vec<f64> = embeddings.iter().map(norm).collect();
        let cos = |a: usize, b: usize| {
            embeddings[a].iter().zip(&embeddings[b]).map(|(x, y)| x * y).sum::<f64>()
                / (norms[a] * norms[b])
        };
        let mut edges = BTreeSet::new();
        for i in 0..n {
            let mut cands: Vec<(usize, f64)> =
                (0..n).filter(|&j| j != i).map(|j| (j, cos(i, j))).collect();
            cands.retain(|&(_, s)| s > threshold);
            cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for (j, _) in cands.into_iter().take(k) {
                edges.insert((i.min(j), i.max(j)));
            }
        }
        edges
    }

    #[test]
    fn matches_exhaustive_similarity_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let embeddings: Vec<Vec<f64>> =
            (0..50).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let graph = knn_graph(&embeddings, 3, 0.0).unwrap();
        let got: BTreeSet<(usize, usize)> =
            graph.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(got, brute_force_edges(&embeddings, 3, 0.0));
    }

    #[test]
    fn graph_is_symmetric_and_self_loop_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let embeddings: Vec<Vec<f64>> =
            (0..20).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let graph = knn_graph(&embeddings, 4, 0.0).unwrap();
        for edge in graph.edges() {
            assert_ne!(edge.u, edge.v);
            assert!(graph.neighbors(edge.u).any(|(n, _)| n == edge.v));
            assert!(graph.neighbors(edge.v).any(|(n, _)| n == edge.u));
            assert!((0.0..=1.0).contains(&edge.weight));
        }
    }
}
