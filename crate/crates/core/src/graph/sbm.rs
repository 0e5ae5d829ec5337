//! Stochastic block model generator for desk-scale experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeFeatures};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SbmConfig {
    pub blocks: usize,
    pub nodes_per_block: usize,
    /// Within-block edge probability.
    pub p_in: f64,
    /// Between-block edge probability; must be strictly below `p_in`.
    pub p_out: f64,
    /// Standard deviation of the Gaussian noise added to the one-hot block
    /// centroid features.
    pub feature_noise: f64,
    pub seed: u64,
}

impl SbmConfig {
    fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.nodes_per_block == 0 {
            return Err(Error::InvalidConfig("blocks and nodes_per_block must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return Err(Error::InvalidConfig(format!(
                "probabilities must lie in [0, 1]: p_in={}, p_out={}",
                self.p_in, self.p_out
            )));
        }
        if !(self.p_out < self.p_in) {
            return Err(Error::InvalidConfig(format!(
                "p_out must be strictly below p_in: p_in={}, p_out={}",
                self.p_in, self.p_out
            )));
        }
        if !(self.feature_noise >= 0.0) {
            return Err(Error::InvalidConfig("feature_noise must be >= 0".into()));
        }
        Ok(())
    }
}

/// Samples a stochastic block model. Node `i` belongs to block
/// `i / nodes_per_block`; its features are the one-hot block centroid plus
/// Gaussian noise. Deterministic per seed.
pub fn sbm_generate(config: &SbmConfig) -> Result<(Graph, NodeFeatures, Vec<usize>)> {
    config.validate()?;
    let n = config.blocks * config.nodes_per_block;
    let block_of = |i: usize| i / config.nodes_per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut graph = Graph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            let p = if block_of(u) == block_of(v) { config.p_in } else { config.p_out };
            if rng.gen_bool(p) {
                graph.add_edge(u, v, 1.0)?;
            }
        }
    }

    let noise = Normal::new(0.0, config.feature_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let rows = (0..n)
        .map(|i| {
            (0..config.blocks)
                .map(|b| {
                    let centroid = if b == block_of(i) { 1.0 } else { 0.0 };
                    if config.feature_noise > 0.0 {
                        centroid + noise.sample(&mut rng)
                    } else {
                        centroid
                    }
                })
                .collect()
        })
        .collect();
    let features = NodeFeatures::dense(rows)?;
    let labels = (0..n).map(block_of).collect();
    Ok((graph, features, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_blocks_form_cliques() {
        let config = SbmConfig {
            blocks: 2,
            nodes_per_block: 3,
            p_in: 1.0,
            p_out: 0.0,
            feature_noise: 0.0,
            seed: 0,
        };
        let (graph, features, labels) = sbm_generate(&config).unwrap();
        // Two disjoint triangles.
        assert_eq!(graph.n_edges(), 6);
        for edge in graph.edges() {
            assert_eq!(labels[edge.u], labels[edge.v]);
        }
        assert_eq!(features.row_dense(0), vec![1.0, 0.0]);
        assert_eq!(features.row_dense(5), vec![0.0, 1.0]);
    }

    #[test]
    fn equal_probabilities_are_rejected() {
        let config = SbmConfig {
            blocks: 2,
            nodes_per_block: 3,
            p_in: 0.4,
            p_out: 0.4,
            feature_noise: 0.0,
            seed: 0,
        };
        assert!(matches!(sbm_generate(&config), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn same_seed_reproduces_the_dataset() {
        let config = SbmConfig {
            blocks: 3,
            nodes_per_block: 10,
            p_in: 0.4,
            p_out: 0.05,
            feature_noise: 0.2,
            seed: 42,
        };
        let (g1, f1, l1) = sbm_generate(&config).unwrap();
        let (g2, f2, l2) = sbm_generate(&config).unwrap();
        assert_eq!(g1.edges(), g2.edges());
        assert_eq!(f1, f2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn densities_sit_within_three_sigma_of_binomial_expectation() {
        let config = SbmConfig {
            blocks: 3,
            nodes_per_block: 20,
            p_in: 0.3,
            p_out: 0.02,
            feature_noise: 0.1,
            seed: 1234,
        };
        let (graph, _, labels) = sbm_generate(&config).unwrap();
        let mut within = 0usize;
        let mut between = 0usize;
        for edge in graph.edges() {
            if labels[edge.u] == labels[edge.v] {
                within += 1;
            } else {
                between += 1;
            }
        }
        let within_pairs: f64 = 3.0 * (20.0 * 19.0 / 2.0);
        let n = 60.0_f64;
        let between_pairs = n * (n - 1.0) / 2.0 - within_pairs;
        let sigma_within = (within_pairs * 0.3 * 0.7).sqrt();
        let sigma_between = (between_pairs * 0.02 * 0.98).sqrt();
        assert!(
            (within as f64 - within_pairs * 0.3).abs() <= 3.0 * sigma_within,
            "within-block count {within} too far from {}",
            within_pairs * 0.3
        );
        assert!(
            (between as f64 - between_pairs * 0.02).abs() <= 3.0 * sigma_between,
            "between-block count {between} too far from {}",
            between_pairs * 0.02
        );
    }

    #[test]
    fn zero_p_out_leaves_blocks_disconnected() {
        let config = SbmConfig {
            blocks: 4,
            nodes_per_block: 8,
            p_in: 0.5,
            p_out: 0.0,
            feature_noise: 0.0,
            seed: 9,
        };
        let (graph, _, labels) = sbm_generate(&config).unwrap();
        assert!(graph.edges().iter().all(|e| labels[e.u] == labels[e.v]));
    }
}
