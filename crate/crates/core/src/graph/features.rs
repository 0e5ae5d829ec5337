//! Per-node feature matrices, dense or sparse.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Row-indexed feature matrix. Sparse rows keep `(column, value)` pairs
/// sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeFeatures {
    Dense { dim: usize, rows: Vec<Vec<f64>> },
    Sparse { dim: usize, rows: Vec<Vec<(usize, f64)>> },
}

impl NodeFeatures {
    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Shape(format!(
                    "feature row {i} has length {} but row 0 has {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("feature row {i} contains non-finite values")));
            }
        }
        Ok(NodeFeatures::Dense { dim, rows })
    }

    pub fn sparse(dim: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            for win in row.windows(2) {
                if win[0].0 == win[1].0 {
                    return Err(Error::Data(format!(
                        "feature row {i} repeats column {}",
                        win[0].0
                    )));
                }
            }
            if let Some(&(c, _)) = row.last() {
                if c >= dim {
                    return Err(Error::Shape(format!(
                        "feature row {i} references column {c} beyond dim {dim}"
                    )));
                }
            }
            if row.iter().any(|(_, v)| !v.is_finite()) {
                return Err(Error::Data(format!("feature row {i} contains non-finite values")));
            }
        }
        Ok(NodeFeatures::Sparse { dim, rows })
    }

    pub fn n_rows(&self) -> usize {
        match self {
            NodeFeatures::Dense { rows, .. } => rows.len(),
            NodeFeatures::Sparse { rows, .. } => rows.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NodeFeatures::Dense { dim, .. } | NodeFeatures::Sparse { dim, .. } => *dim,
        }
    }

    /// Materializes row `i` as a dense vector.
    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        match self {
            NodeFeatures::Dense { rows, .. } => rows[i].clone(),
            NodeFeatures::Sparse { dim, rows } => {
                let mut out = vec![0.0; *dim];
                for &(c, v) in &rows[i] {
                    out[c] = v;
                }
                out
            }
        }
    }

    /// Number of structurally stored nonzeros in row `i`.
    pub fn row_nnz(&self, i: usize) -> usize {
        match self {
            NodeFeatures::Dense { rows, .. } => rows[i].iter().filter(|&&v| v != 0.0).count(),
            NodeFeatures::Sparse { rows, .. } => rows[i].len(),
        }
    }
}

/// Adjacency-row features: row `i` is the n-dimensional binary vector with
/// a 1 at `i` itself and at every neighbor of `i`. Emitted sparse.
pub fn adjacency_features(graph: &Graph) -> NodeFeatures {
    let n = graph.n_nodes();
    let rows = (0..n)
        .map(|i| {
            let mut cols: Vec<usize> = graph.neighbors(i).map(|(v, _)| v).collect();
            cols.push(i);
            cols.sort_unstable();
            cols.into_iter().map(|c| (c, 1.0)).collect()
        })
        .collect();
    NodeFeatures::sparse(n, rows).expect("adjacency rows are well-formed by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn three_node_path_rows() {
        let graph = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let features = adjacency_features(&graph);
        assert_eq!(features.row_dense(0), vec![1.0, 1.0, 0.0]);
        assert_eq!(features.row_dense(1), vec![1.0, 1.0, 1.0]);
        assert_eq!(features.row_dense(2), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn empty_graph_gives_identity() {
        let graph = Graph::new(4);
        let features = adjacency_features(&graph);
        for i in 0..4 {
            let mut expected = vec![0.0; 4];
            expected[i] = 1.0;
            assert_eq!(features.row_dense(i), expected);
        }
    }

    #[test]
    fn rows_match_neighbor_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        let mut graph = Graph::new(n);
        let mut neighbor_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.15) {
                    graph.add_edge(u, v, 1.0).unwrap();
                    neighbor_sets[u].insert(v);
                    neighbor_sets[v].insert(u);
                }
            }
        }
        let features = adjacency_features(&graph);
        for i in 0..n {
            let mut expected = neighbor_sets[i].clone();
            expected.insert(i);
            let row = features.row_dense(i);
            let nonzeros: BTreeSet<usize> =
                row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(c, _)| c).collect();
            assert_eq!(nonzeros, expected);
            assert_eq!(features.row_nnz(i), 1 + neighbor_sets[i].len());
        }
    }

    #[test]
    fn sparse_rejects_out_of_range_column() {
        assert!(NodeFeatures::sparse(3, vec![vec![(3, 1.0)]]).is_err());
    }

    #[test]
    fn dense_rejects_ragged_rows() {
        assert!(NodeFeatures::dense(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
