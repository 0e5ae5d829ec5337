//! Classical label propagation: a convex quadratic objective over per-node
//! label distributions, solved by Jacobi sweeps, plus a dense direct solver
//! used to cross-check the iterates.
//!
//! The objective is
//!
//! ```text
//! mu1 * sum_{v labeled} ||Y_hat_v - Y_v||^2
//!   + mu2 * sum_{v in V} sum_{u in N(v)} w_uv ||Y_hat_v - Y_hat_u||^2
//!   + mu3 * sum_{v in V} ||Y_hat_v - U||^2
//! ```
//!
//! where the neighbor sum runs over ordered pairs, so each undirected edge
//! contributes twice. The Jacobi sweep below is the exact coordinate
//! minimizer of that objective: holding all other rows fixed, the optimal
//! row is the convex combination
//!
//! ```text
//! Y_hat_v = (mu1*1[v labeled]*Y_v + 2*mu2*sum_u w_uv*Y_hat_u + mu3*U)
//!           / (mu1*1[v labeled] + 2*mu2*sum_u w_uv + mu3)
//! ```
//!
//! (the factor 2 on `mu2` comes from the edge appearing on both sides of
//! the ordered double sum). Because every update is a convex combination of
//! simplex rows, iterates stay on the probability simplex exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Hyperparameters and stopping rule for propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpConfig {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub max_iter: usize,
    /// Stop when the max absolute per-entry change of a sweep is <= tol.
    pub tol: f64,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self { mu1: 1.0, mu2: 1.0, mu3: 0.01, max_iter: 10_000, tol: 1e-8 }
    }
}

impl LpConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [("mu1", self.mu1), ("mu2", self.mu2), ("mu3", self.mu3)] {
            if !(mu >= 0.0) || !mu.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {mu}")));
            }
        }
        if self.mu1 == 0.0 && self.mu3 == 0.0 {
            return Err(Error::InvalidConfig(
                "mu1 or mu3 must be positive, otherwise the fixed point is underdetermined".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig("tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Result of a propagation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Propagation {
    /// Per-node label distribution rows.
    pub distributions: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Max absolute per-entry change of the final sweep.
    pub max_change: f64,
    /// Nodes whose update denominator was zero; they keep their
    /// initialization.
    pub underdetermined_nodes: Vec<usize>,
}

fn check_simplex(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Data(format!("{what} has negative or non-finite entries")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Data(format!("{what} sums to {sum}, expected 1 within 1e-9")));
    }
    Ok(())
}

fn check_inputs(
    graph: &Graph,
    seeds: &[Option<Vec<f64>>],
    prior: &[f64],
) -> Result<usize> {
    if seeds.len() != graph.n_nodes() {
        return Err(Error::Shape(format!(
            "seed list length {} does not match node count {}",
            seeds.len(),
            graph.n_nodes()
        )));
    }
    let n_labels = prior.len();
    if n_labels == 0 {
        return Err(Error::InvalidConfig("prior must have at least one label".into()));
    }
    check_simplex(prior, "prior")?;
    for (v, seed) in seeds.iter().enumerate() {
        if let Some(row) = seed {
            if row.len() != n_labels {
                return Err(Error::Shape(format!(
                    "seed row for node {v} has {} labels, prior has {n_labels}",
                    row.len()
                )));
            }
            check_simplex(row, &format!("seed row for node {v}"))?;
        }
    }
    Ok(n_labels)
}

/// One-hot distribution over `n_labels` classes.
pub fn one_hot(class: usize, n_labels: usize) -> Result<Vec<f64>> {
    if class >= n_labels {
        return Err(Error::InvalidLabel { label: class, n_classes: n_labels });
    }
    let mut row = vec![0.0; n_labels];
    row[class] = 1.0;
    Ok(row)
}

/// Evaluates the propagation objective at `yhat`. The neighbor sum follows
/// the ordered-pair convention, so each undirected edge contributes twice.
pub fn lp_objective(
    yhat: &[Vec<f64>],
    graph: &Graph,
    seeds: &[Option<Vec<f64>>],
    prior: &[f64],
    config: &LpConfig,
) -> Result<f64> {
    let n_labels = check_inputs(graph, seeds, prior)?;
    if yhat.len() != graph.n_nodes() {
        return Err(Error::Shape(format!(
            "yhat has {} rows, graph has {} nodes",
            yhat.len(),
            graph.n_nodes()
        )));
    }
    for (v, row) in yhat.iter().enumerate() {
        if row.len() != n_labels {
            return Err(Error::Shape(format!("yhat row {v} has wrong length")));
        }
    }
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();

    let mut seed_term = 0.0;
    for (v, seed) in seeds.iter().enumerate() {
        if let Some(y) = seed {
            seed_term += sq(&yhat[v], y);
        }
    }
    let mut neighbor_term = 0.0;
    for edge in graph.edges() {
        // Both orientations of the ordered double sum.
        neighbor_term += 2.0 * edge.weight * sq(&yhat[edge.u], &yhat[edge.v]);
    }
    let mut prior_term = 0.0;
    for row in yhat {
        prior_term += sq(row, prior);
    }
    Ok(config.mu1 * seed_term + config.mu2 * neighbor_term + config.mu3 * prior_term)
}

fn initial_state(seeds: &[Option<Vec<f64>>], prior: &[f64]) -> Vec<Vec<f64>> {
    seeds.iter().map(|s| s.clone().unwrap_or_else(|| prior.to_vec())).collect()
}

/// Iterates Jacobi sweeps until the max per-entry change drops to `tol` or
/// `max_iter` sweeps have run. Nodes with a zero update denominator keep
/// their initialization and are reported.
pub fn jacobi_propagate(
    graph: &Graph,
    seeds: &[Option<Vec<f64>>],
    prior: &[f64],
    config: &LpConfig,
) -> Result<Propagation> {
    config.validate()?;
    let n_labels = check_inputs(graph, seeds, prior)?;
    let n = graph.n_nodes();
    let wdeg: Vec<f64> = (0..n).map(|v| graph.weighted_degree(v)).collect();
    let denom: Vec<f64> = (0..n)
        .map(|v| {
            config.mu1 * f64::from(seeds[v].is_some() as u8)
                + 2.0 * config.mu2 * wdeg[v]
                + config.mu3
        })
        .collect();
    let underdetermined_nodes: Vec<usize> = (0..n).filter(|&v| denom[v] == 0.0).collect();

    let mut yhat = initial_state(seeds, prior);
    let mut next = yhat.clone();
    let mut iterations = 0;
    let mut max_change = f64::INFINITY;
    let mut converged = false;

    while iterations < config.max_iter {
        iterations += 1;
        max_change = 0.0;
        for v in 0..n {
            if denom[v] == 0.0 {
                continue;
            }
            let row = &mut next[v];
            for l in 0..n_labels {
                let mut num = config.mu3 * prior[l];
                if let Some(y) = &seeds[v] {
                    num += config.mu1 * y[l];
                }
                row[l] = num;
            }
            for (u, w) in graph.neighbors(v) {
                let coeff = 2.0 * config.mu2 * w;
                for l in 0..n_labels {
                    row[l] += coeff * yhat[u][l];
                }
            }
            for l in 0..n_labels {
                row[l] /= denom[v];
                max_change = max_change.max((row[l] - yhat[v][l]).abs());
            }
        }
        std::mem::swap(&mut yhat, &mut next);
        if max_change <= config.tol {
            converged = true;
            break;
        }
    }

    Ok(Propagation { distributions: yhat, converged, iterations, max_change, underdetermined_nodes })
}

/// Dense direct solve of the objective's stationarity system, one linear
/// solve shared across label columns. Enforced to small instances.
pub fn direct_solve(
    graph: &Graph,
    seeds: &[Option<Vec<f64>>],
    prior: &[f64],
    config: &LpConfig,
) -> Result<Propagation> {
    config.validate()?;
    let n_labels = check_inputs(graph, seeds, prior)?;
    let n = graph.n_nodes();
    if n > 200 {
        return Err(Error::InvalidConfig(format!(
            "direct_solve is limited to 200 nodes, got {n}"
        )));
    }

    // Stationarity of the objective per node v and label l:
    //   (mu1*1_l(v) + 2*mu2*wdeg(v) + mu3) yhat_vl
    //     - 2*mu2 * sum_u w_uv yhat_ul = mu1*1_l(v) Y_vl + mu3 U_l
    let mut matrix = vec![0.0; n * n];
    for v in 0..n {
        let labeled = f64::from(seeds[v].is_some() as u8);
        matrix[v * n + v] =
            config.mu1 * labeled + 2.0 * config.mu2 * graph.weighted_degree(v) + config.mu3;
        for (u, w) in graph.neighbors(v) {
            matrix[v * n + u] -= 2.0 * config.mu2 * w;
        }
    }
    let mut rhs = vec![vec![0.0; n_labels]; n];
    for v in 0..n {
        for l in 0..n_labels {
            let mut b = config.mu3 * prior[l];
            if let Some(y) = &seeds[v] {
                b += config.mu1 * y[l];
            }
            rhs[v][l] = b;
        }
    }
    let distributions = solve_multi(&mut matrix, rhs, n)?;
    Ok(Propagation {
        distributions,
        converged: true,
        iterations: 0,
        max_change: 0.0,
        underdetermined_nodes: Vec::new(),
    })
}

/// Gaussian elimination with partial pivoting; `rhs` rows are solved in
/// place for all label columns at once.
fn solve_multi(matrix: &mut [f64], mut rhs: Vec<Vec<f64>>, n: usize) -> Result<Vec<Vec<f64>>> {
    let scale = matrix.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| {
                matrix[a * n + col].abs().partial_cmp(&matrix[b * n + col].abs()).unwrap()
            })
            .expect("non-empty range");
        if matrix[pivot_row * n + col].abs() <= 1e-12 * scale {
            return Err(Error::SingularSystem(format!(
                "pivot {:.3e} at column {col}",
                matrix[pivot_row * n + col]
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                matrix.swap(col * n + j, pivot_row * n + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = matrix[col * n + col];
        for row in col + 1..n {
            let factor = matrix[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                matrix[row * n + j] -= factor * matrix[col * n + j];
            }
            let (upper, lower) = rhs.split_at_mut(row);
            for (r, p) in lower[0].iter_mut().zip(&upper[col]) {
                *r -= factor * p;
            }
        }
    }
    // Back substitution.
    for col in (0..n).rev() {
        let pivot = matrix[col * n + col];
        for l in 0..rhs[col].len() {
            let mut acc = rhs[col][l];
            for j in col + 1..n {
                acc -= matrix[col * n + j] * rhs[j][l];
            }
            rhs[col][l] = acc / pivot;
        }
    }
    Ok(rhs)
}

/// Hard labels by per-row argmax; ties break toward the lowest index.
pub fn lp_predict(distributions: &[Vec<f64>]) -> Vec<usize> {
    distributions.iter().map(|row| argmax(row)).collect()
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_prior(n_labels: usize) -> Vec<f64> {
        vec![1.0 / n_labels as f64; n_labels]
    }

    #[test]
    fn objective_vanishes_when_everything_matches() {
        let graph = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 0.5)]).unwrap();
        let prior = uniform_prior(2);
        let seeds = vec![Some(prior.clone()), None, Some(prior.clone())];
        let yhat = vec![prior.clone(); 3];
        let config = LpConfig::default();
        let value = lp_objective(&yhat, &graph, &seeds, &prior, &config).unwrap();
        assert_eq!(value, 0.0);
    }

    #[test]
    fn objective_matches_term_by_term_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let graph =
            Graph::from_edges(5, [(0, 1, 0.7), (1, 2, 1.3), (2, 3, 0.2), (3, 4, 2.0), (0, 4, 0.5)])
                .unwrap();
        let n_labels = 3;
        let random_simplex = |rng: &mut ChaCha8Rng| {
            let mut row: Vec<f64> = (0..n_labels).map(|_| rng.gen_range(0.01..1.0)).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            row
        };
        let prior = random_simplex(&mut rng);
        let seeds: Vec<Option<Vec<f64>>> = (0..5)
            .map(|_| if rng.gen_bool(0.5) { Some(random_simplex(&mut rng)) } else { None })
            .collect();
        let yhat: Vec<Vec<f64>> = (0..5).map(|_| random_simplex(&mut rng)).collect();
        let config = LpConfig { mu1: 0.9, mu2: 0.4, mu3: 0.2, ..LpConfig::default() };

        // Spreadsheet-style recomputation: enumerate ordered neighbor pairs.
        let sq = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
        };
        let mut expected = 0.0;
        for v in 0..5 {
            if let Some(y) = &seeds[v] {
                expected += config.mu1 * sq(&yhat[v], y);
            }
            for (u, w) in graph.neighbors(v) {
                expected += config.mu2 * w * sq(&yhat[v], &yhat[u]);
            }
            expected += config.mu3 * sq(&yhat[v], &prior);
        }
        let got = lp_objective(&yhat, &graph, &seeds, &prior, &config).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn decoupled_nodes_reach_closed_form_in_one_sweep() {
        let graph = Graph::new(3);
        let prior = vec![0.25, 0.75];
        let seeds = vec![Some(vec![1.0, 0.0]), None, Some(vec![0.0, 1.0])];
        let config = LpConfig { mu1: 2.0, mu2: 0.0, mu3: 0.5, max_iter: 50, tol: 1e-12 };
        let result = jacobi_propagate(&graph, &seeds, &prior, &config).unwrap();
        assert!(result.converged);
        assert!(result.iterations <= 2);
        // Labeled: (mu1*Y + mu3*U) / (mu1 + mu3); unlabeled: U.
        let expect0: Vec<f64> =
            (0..2).map(|l| (2.0 * [1.0, 0.0][l] + 0.5 * prior[l]) / 2.5).collect();
        for l in 0..2 {
            assert!((result.distributions[0][l] - expect0[l]).abs() < 1e-12);
            assert!((result.distributions[1][l] - prior[l]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_seed_pulls_its_neighbor_to_the_same_class() {
        let graph = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let prior = uniform_prior(2);
        let seeds = vec![Some(vec![1.0, 0.0]), None];
        let config = LpConfig { mu1: 1.0, mu2: 1.0, mu3: 0.0, max_iter: 10_000, tol: 1e-12 };
        let result = jacobi_propagate(&graph, &seeds, &prior, &config).unwrap();
        assert!(result.converged);
        assert!(result.distributions[1][0] > 0.999, "{:?}", result.distributions);
        assert_eq!(lp_predict(&result.distributions), vec![0, 0]);
    }

    #[test]
    fn jacobi_agrees_with_direct_solve_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let n = rng.gen_range(2..=10);
            let n_labels = rng.gen_range(2..=4);
            let mut graph = Graph::new(n);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.4) {
                        graph.add_edge(u, v, rng.gen_range(0.1..2.0)).unwrap();
                    }
                }
            }
            let random_simplex = |rng: &mut ChaCha8Rng| {
                let mut row: Vec<f64> = (0..n_labels).map(|_| rng.gen_range(0.01..1.0)).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                row
            };
            let prior = random_simplex(&mut rng);
            let seeds: Vec<Option<Vec<f64>>> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { Some(random_simplex(&mut rng)) } else { None })
                .collect();
            let config = LpConfig {
                mu1: rng.gen_range(0.1..2.0),
                mu2: rng.gen_range(0.0..1.0),
                mu3: rng.gen_range(0.05..0.5),
                max_iter: 50_000,
                tol: 1e-12,
            };
            let jacobi = jacobi_propagate(&graph, &seeds, &prior, &config).unwrap();
            assert!(jacobi.converged);
            let direct = direct_solve(&graph, &seeds, &prior, &config).unwrap();
            for v in 0..n {
                for l in 0..n_labels {
                    let a = jacobi.distributions[v][l];
                    let b = direct.distributions[v][l];
                    assert!((a - b).abs() < 1e-6, "node {v} label {l}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn every_sweep_stays_on_the_simplex() {
        let graph =
            Graph::from_edges(6, [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 4, 1.0), (4, 5, 0.7)])
                .unwrap();
        let prior = uniform_prior(3);
        let seeds = vec![
            Some(vec![1.0, 0.0, 0.0]),
            None,
            None,
            Some(vec![0.0, 0.5, 0.5]),
            None,
            None,
        ];
        for sweeps in 1..=30 {
            let config = LpConfig { mu1: 1.0, mu2: 0.8, mu3: 0.1, max_iter: sweeps, tol: 0.0 };
            let result = jacobi_propagate(&graph, &seeds, &prior, &config).unwrap();
            for row in &result.distributions {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-9, "row sum {sum} after {sweeps} sweeps");
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn objective_at_fixed_point_beats_initialization_and_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let graph = Graph::from_edges(
            10,
            [
                (0, 1, 1.0),
                (1, 2, 0.6),
                (2, 3, 1.2),
                (3, 4, 0.8),
                (4, 5, 1.0),
                (5, 6, 0.4),
                (6, 7, 1.5),
                (7, 8, 1.0),
                (8, 9, 0.9),
                (0, 9, 0.3),
            ],
        )
        .unwrap();
        let prior = uniform_prior(3);
        let seeds: Vec<Option<Vec<f64>>> = (0..10)
            .map(|v| if v % 3 == 0 { Some(one_hot(v % 2, 3).unwrap()) } else { None })
            .collect();
        let config = LpConfig { mu1: 1.0, mu2: 0.5, mu3: 0.1, max_iter: 50_000, tol: 1e-13 };
        let solution = direct_solve(&graph, &seeds, &prior, &config).unwrap().distributions;
        let at_solution = lp_objective(&solution, &graph, &seeds, &prior, &config).unwrap();

        let init = initial_state(&seeds, &prior);
        let at_init = lp_objective(&init, &graph, &seeds, &prior, &config).unwrap();
        assert!(at_solution <= at_init);

        // Simplex-preserving perturbations: mix each row toward a random
        // simplex point.
        for _ in 0..1000 {
            let mut perturbed = solution.clone();
            for row in &mut perturbed {
                let mut noise: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..1.0)).collect();
                let sum: f64 = noise.iter().sum();
                noise.iter_mut().for_each(|p| *p /= sum);
                let t = rng.gen_range(0.0..0.3);
                for l in 0..3 {
                    row[l] = (1.0 - t) * row[l] + t * noise[l];
                }
            }
            let at_perturbed = lp_objective(&perturbed, &graph, &seeds, &prior, &config).unwrap();
            assert!(
                at_solution <= at_perturbed + 1e-12,
                "perturbation beat the solution: {at_solution} > {at_perturbed}"
            );
        }
    }

    #[test]
    fn zero_denominator_nodes_stay_at_init_and_are_flagged() {
        // Node 2 is isolated and unlabeled with mu3 = 0.
        let graph = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        let prior = uniform_prior(2);
        let seeds = vec![Some(vec![1.0, 0.0]), None, None];
        let config = LpConfig { mu1: 1.0, mu2: 1.0, mu3: 0.0, max_iter: 1000, tol: 1e-10 };
        let result = jacobi_propagate(&graph, &seeds, &prior, &config).unwrap();
        assert_eq!(result.underdetermined_nodes, vec![2]);
        assert_eq!(result.distributions[2], prior);
    }

    #[test]
    fn direct_solve_reports_singular_systems() {
        // Two connected unlabeled nodes with no prior anchor on their
        // component would be singular; force it by making the whole graph
        // unlabeled except a disconnected seed.
        let graph = Graph::from_edges(3, [(1, 2, 1.0)]).unwrap();
        let prior = uniform_prior(2);
        let seeds = vec![Some(vec![1.0, 0.0]), None, None];
        let config = LpConfig { mu1: 1.0, mu2: 1.0, mu3: 0.0, max_iter: 10, tol: 1e-8 };
        assert!(matches!(
            direct_solve(&graph, &seeds, &prior, &config),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn predict_breaks_ties_toward_the_lowest_index() {
        assert_eq!(lp_predict(&[vec![0.2, 0.5, 0.3]]), vec![1]);
        assert_eq!(lp_predict(&[vec![0.5, 0.5]], ), vec![0]);
    }
}
