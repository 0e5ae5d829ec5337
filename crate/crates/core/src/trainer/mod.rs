//! Stochastic training of graph-regularized networks.
//!
//! Training is edge-driven: each epoch covers every in-scope edge exactly
//! once via [`sample_edge_batches`], evaluates the edge-decomposed loss of
//! the batch, and takes one SGD step on the batch mean. Labeled nodes with
//! no incident edges are carried by a separate exactly-once node stream
//! folded into the edge steps one batch at a time, so summing the raw batch
//! losses of an epoch reproduces [`edge_decomposed_objective`].
//!
//! When every alpha is zero (or the only nonzero alpha is dropped), the
//! loop reduces to supervised-only SGD over class-balanced node batches;
//! the regularizer machinery is bypassed entirely.
//!
//! Seeding: epoch `e` derives its edge/node sampler seed as
//! `derive_seed(seed, 2e)` and its isolated-node shuffle as
//! `derive_seed(seed, 2e + 1)`; parameter initialization uses `seed`
//! directly. Identical configs produce bit-identical histories.

mod objective;

pub use objective::{
    edge_batch_objective, edge_decomposed_objective, full_objective, isolated_labeled_nodes,
    objective_breakdown, supervised_cost, ObjectiveBreakdown,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::graph::{
    class_balanced_batches, partition_edges, sample_edge_batches, Graph, NodeFeatures,
    SamplerMode,
};
use crate::labelprop::argmax;
use crate::nn::{
    backward_composite, forward, softmax, Activation, CompositeLoss, DistanceMetric, ModelParams,
    ReprLayer, Sgd,
};
use objective::{build_batch_loss, target_for};

/// Per-node label assignment. `None` marks an unlabeled node; labeled nodes
/// carry a non-empty set of class ids (a singleton unless multi-label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub classes: Vec<Option<Vec<usize>>>,
    pub n_classes: usize,
}

impl Labels {
    pub fn new(classes: Vec<Option<Vec<usize>>>, n_classes: usize) -> Result<Self> {
        let labels = Self { classes, n_classes };
        labels.validate()?;
        Ok(labels)
    }

    pub fn single(assignments: Vec<Option<usize>>, n_classes: usize) -> Result<Self> {
        Self::new(
            assignments.into_iter().map(|a| a.map(|c| vec![c])).collect(),
            n_classes,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 {
            return Err(Error::InvalidConfig("n_classes must be >= 1".into()));
        }
        for (node, set) in self.classes.iter().enumerate() {
            if let Some(set) = set {
                if set.is_empty() {
                    return Err(Error::Data(format!("node {node} has an empty label set")));
                }
                if let Some(&bad) = set.iter().find(|&&c| c >= self.n_classes) {
                    return Err(Error::InvalidLabel { label: bad, n_classes: self.n_classes });
                }
            }
        }
        Ok(())
    }

    pub fn labeled_mask(&self) -> Vec<bool> {
        self.classes.iter().map(|c| c.is_some()).collect()
    }

    pub fn n_labeled(&self) -> usize {
        self.classes.iter().filter(|c| c.is_some()).count()
    }

    /// Labeled nodes with their first class id, in node order. Drives the
    /// class-balanced sampler.
    pub fn labeled_nodes(&self) -> Vec<(usize, usize)> {
        self.classes
            .iter()
            .enumerate()
            .filter_map(|(n, set)| set.as_ref().map(|s| (n, s[0])))
            .collect()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgmConfig {
    /// Weight of labeled-labeled edge penalties.
    pub alpha_ll: f64,
    /// Weight of labeled-unlabeled edge penalties.
    pub alpha_lu: f64,
    /// Weight of unlabeled-unlabeled edge penalties.
    pub alpha_uu: f64,
    pub metric: DistanceMetric,
    pub repr: ReprLayer,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub sampler: SamplerMode,
    /// Drop unlabeled-unlabeled edges from the objective and the training
    /// stream.
    pub drop_uu: bool,
    /// Train independent one-vs-rest logistic heads instead of softmax.
    pub multi_label: bool,
    pub seed: u64,
}

impl NgmConfig {
    /// A reasonable starting point; alphas follow the common default of
    /// one shared value of 0.1.
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha_ll: alpha,
            alpha_lu: alpha,
            alpha_uu: alpha,
            metric: DistanceMetric::SquaredL2,
            repr: ReprLayer::LastHidden,
            hidden_dims: vec![32, 16],
            activation: Activation::Relu,
            learning_rate: 0.1,
            momentum: 0.0,
            batch_size: 16,
            epochs: 100,
            sampler: SamplerMode::UniformShuffle,
            drop_uu: false,
            multi_label: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, alpha) in [
            ("alpha_ll", self.alpha_ll),
            ("alpha_lu", self.alpha_lu),
            ("alpha_uu", self.alpha_uu),
        ] {
            if !(alpha >= 0.0) || !alpha.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {alpha}"
                )));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.metric.requires_output_repr() && self.repr != ReprLayer::Output {
            return Err(Error::InvalidConfig(
                "cross-entropy distance metrics require repr = output".into(),
            ));
        }
        if self.repr == ReprLayer::LastHidden && self.hidden_dims.is_empty() {
            return Err(Error::InvalidConfig(
                "repr = last-hidden requires at least one hidden layer".into(),
            ));
        }
        Ok(())
    }

    /// True when no edge penalty can contribute: the loop degenerates to
    /// supervised-only training.
    pub fn is_supervised_only(&self) -> bool {
        self.alpha_ll == 0.0
            && self.alpha_lu == 0.0
            && (self.alpha_uu == 0.0 || self.drop_uu)
    }

    pub(crate) fn layer_dims(&self, input_dim: usize, n_classes: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(n_classes);
        dims
    }
}

/// Objective components and evaluation accuracy recorded after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub supervised: f64,
    pub reg_ll: f64,
    pub reg_lu: f64,
    pub reg_uu: f64,
    /// Mean of the per-step batch-mean losses.
    pub mean_batch_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_accuracy: Option<f64>,
}

/// One self-training round: labeled-set sizes before and after the
/// neighbor-expansion step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub labeled_before: usize,
    pub labeled_after: usize,
}

/// Everything a training run produces. Serializes to JSON as the run
/// history; per-batch losses are normalized by batch size before each
/// gradient step (recorded in `loss_normalization`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub config: NgmConfig,
    pub n_classes: usize,
    pub loss_normalization: String,
    pub epochs: Vec<EpochRecord>,
    /// Populated by self-training only.
    pub rounds: Vec<RoundRecord>,
    /// Label assignment after self-training (seeds plus pseudo-labels).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_labels: Option<Vec<Option<Vec<usize>>>>,
    pub params: ModelParams,
}

/// Held-out nodes with single-label ground truth, scored after each epoch.
#[derive(Debug, Clone)]
pub struct EvalSplit {
    pub nodes: Vec<usize>,
    pub truth: Vec<usize>,
}

/// Trains on the graph with the given per-node labels.
pub fn train(
    graph: &Graph,
    features: &NodeFeatures,
    labels: &Labels,
    config: &NgmConfig,
) -> Result<TrainHistory> {
    train_with_eval(graph, features, labels, None, config)
}

/// [`train`] with per-epoch accuracy on a held-out split.
pub fn train_with_eval(
    graph: &Graph,
    features: &NodeFeatures,
    labels: &Labels,
    eval: Option<&EvalSplit>,
    config: &NgmConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    labels.validate()?;
    if features.n_rows() != graph.n_nodes() || labels.classes.len() != graph.n_nodes() {
        return Err(Error::Data(format!(
            "graph has {} nodes but features have {} rows and labels {} entries",
            graph.n_nodes(),
            features.n_rows(),
            labels.classes.len()
        )));
    }
    if labels.n_labeled() == 0 {
        return Err(Error::Data("training requires at least one labeled node".into()));
    }
    if !config.multi_label {
        for (node, set) in labels.classes.iter().enumerate() {
            if let Some(set) = set {
                if set.len() != 1 {
                    return Err(Error::Data(format!(
                        "node {node} has {} labels but multi_label is off",
                        set.len()
                    )));
                }
            }
        }
    }

    let dims = config.layer_dims(features.dim(), labels.n_classes);
    let mut params = ModelParams::init(&dims, config.activation, config.seed)?;
    let mut sgd = Sgd::new(config.learning_rate, config.momentum)?;
    let mask = labels.labeled_mask();
    let partition = partition_edges(graph, &mask)?;
    let labeled_nodes = labels.labeled_nodes();

    let training_edges: Vec<usize> = if config.drop_uu {
        partition.ll.iter().chain(&partition.lu).copied().collect()
    } else {
        partition.ll.iter().chain(&partition.lu).chain(&partition.uu).copied().collect()
    };
    let isolated = isolated_labeled_nodes(graph, labels);

    let mut history = TrainHistory {
        config: config.clone(),
        n_classes: labels.n_classes,
        loss_normalization: "batch-mean".into(),
        epochs: Vec::with_capacity(config.epochs),
        rounds: Vec::new(),
        final_labels: None,
        params: params.clone(),
    };

    for epoch in 0..config.epochs {
        let sampler_seed = derive_seed(config.seed, 2 * epoch as u64);
        let mut batch_losses = Vec::new();

        if config.is_supervised_only() {
            let batches = class_balanced_batches(
                &labeled_nodes,
                labels.n_classes,
                config.batch_size,
                sampler_seed,
            )?;
            for (b, batch) in batches.iter().enumerate() {
                let mut inputs = Vec::with_capacity(batch.len());
                let mut loss = CompositeLoss::new();
                for (slot, &node) in batch.iter().enumerate() {
                    inputs.push(features.row_dense(node));
                    loss = loss.supervised(
                        slot,
                        target_for(labels, node, config.multi_label)?,
                        1.0,
                    );
                }
                batch_losses.push(apply_step(
                    &mut params,
                    &mut sgd,
                    &inputs,
                    &loss,
                    batch.len(),
                    epoch,
                    b,
                )?);
            }
        } else {
            let edge_batches = sample_edge_batches(
                graph,
                &mask,
                &training_edges,
                config.batch_size,
                config.sampler,
                sampler_seed,
            )?;
            let iso_seed = derive_seed(config.seed, 2 * epoch as u64 + 1);
            let mut iso = isolated.clone();
            iso.shuffle(&mut ChaCha8Rng::seed_from_u64(iso_seed));
            let iso_batches: Vec<&[usize]> = iso.chunks(config.batch_size).collect();

            let n_steps = edge_batches.len().max(iso_batches.len());
            for step in 0..n_steps {
                let empty_batch = [];
                let edges = edge_batches.get(step).map_or(&empty_batch[..], |b| &b.edges);
                let nodes = iso_batches.get(step).copied().unwrap_or(&[]);
                let (inputs, loss, count) =
                    build_batch_loss(edges, nodes, features, labels, config)?;
                if count == 0 {
                    continue;
                }
                batch_losses.push(apply_step(
                    &mut params, &mut sgd, &inputs, &loss, count, epoch, step,
                )?);
            }
        }

        let breakdown = objective_breakdown(&params, graph, &partition, features, labels, config)?;
        let eval_accuracy = match eval {
            Some(split) => Some(split_accuracy(&params, features, split)?),
            None => None,
        };
        let mean_batch_loss = if batch_losses.is_empty() {
            0.0
        } else {
            batch_losses.iter().sum::<f64>() / batch_losses.len() as f64
        };
        history.epochs.push(EpochRecord {
            epoch,
            objective: breakdown.total,
            supervised: breakdown.supervised,
            reg_ll: breakdown.reg_ll,
            reg_lu: breakdown.reg_lu,
            reg_uu: breakdown.reg_uu,
            mean_batch_loss,
            eval_accuracy,
        });
    }

    history.params = params;
    Ok(history)
}

fn apply_step(
    params: &mut ModelParams,
    sgd: &mut Sgd,
    inputs: &[Vec<f64>],
    loss: &CompositeLoss,
    count: usize,
    epoch: usize,
    step: usize,
) -> Result<f64> {
    let (raw, mut grad) = backward_composite(params, inputs, loss)?;
    let scale = 1.0 / count as f64;
    let value = raw * scale;
    if !value.is_finite() {
        return Err(Error::NumericFault(format!(
            "non-finite loss {raw} in epoch {epoch}, step {step} ({count} items)"
        )));
    }
    grad.scale(scale);
    if !grad.is_finite() {
        return Err(Error::NumericFault(format!(
            "non-finite gradient in epoch {epoch}, step {step} ({count} items)"
        )));
    }
    sgd.step(params, &grad)?;
    Ok(value)
}

fn split_accuracy(params: &ModelParams, features: &NodeFeatures, split: &EvalSplit) -> Result<f64> {
    if split.nodes.len() != split.truth.len() {
        return Err(Error::Data("eval split nodes and truth differ in length".into()));
    }
    if split.nodes.is_empty() {
        return Err(Error::Data("eval split is empty".into()));
    }
    let mut hits = 0usize;
    for (&node, &truth) in split.nodes.iter().zip(&split.truth) {
        let trace = forward(params, &features.row_dense(node))?;
        if argmax(trace.logits()) == truth {
            hits += 1;
        }
    }
    Ok(hits as f64 / split.nodes.len() as f64)
}

/// Hard labels and softmax probability rows, one forward pass per node.
/// Ties break toward the lowest class index.
pub fn predict(params: &ModelParams, features: &NodeFeatures) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut hard = Vec::with_capacity(features.n_rows());
    let mut probs = Vec::with_capacity(features.n_rows());
    for node in 0..features.n_rows() {
        let trace = forward(params, &features.row_dense(node))?;
        let p = softmax(trace.logits());
        hard.push(argmax(&p));
        probs.push(p);
    }
    Ok((hard, probs))
}

/// Per-node label sets for one-vs-rest heads: class `c` is predicted when
/// `sigmoid(g_c) > threshold`.
pub fn predict_multi(
    params: &ModelParams,
    features: &NodeFeatures,
    threshold: f64,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(features.n_rows());
    for node in 0..features.n_rows() {
        let trace = forward(params, &features.row_dense(node))?;
        out.push(
            trace
                .logits()
                .iter()
                .enumerate()
                .filter(|(_, &g)| 1.0 / (1.0 + (-g).exp()) > threshold)
                .map(|(c, _)| c)
                .collect(),
        );
    }
    Ok(out)
}

/// Self-training: each round trains from a fresh seed-deterministic
/// initialization on the current labeled set, then assigns the model's
/// argmax prediction to every unlabeled immediate neighbor of a labeled
/// node. Existing labels (seeds and earlier pseudo-labels) are never
/// overwritten, so the labeled set only grows. The edge partition is
/// recomputed inside each round's training call.
pub fn self_train(
    graph: &Graph,
    features: &NodeFeatures,
    seed_labels: &Labels,
    config: &NgmConfig,
    rounds: usize,
) -> Result<TrainHistory> {
    self_train_with_eval(graph, features, seed_labels, None, config, rounds)
}

/// [`self_train`] with per-epoch accuracy on a held-out split.
pub fn self_train_with_eval(
    graph: &Graph,
    features: &NodeFeatures,
    seed_labels: &Labels,
    eval: Option<&EvalSplit>,
    config: &NgmConfig,
    rounds: usize,
) -> Result<TrainHistory> {
    if rounds == 0 {
        return Err(Error::InvalidConfig("self-training needs at least one round".into()));
    }
    let mut labels = seed_labels.clone();
    let mut combined: Option<TrainHistory> = None;

    for round in 0..rounds {
        let outcome = train_with_eval(graph, features, &labels, eval, config)?;
        let labeled_before = labels.n_labeled();

        if round + 1 < rounds {
            let (pred, _) = predict(&outcome.params, features)?;
            let mask = labels.labeled_mask();
            for node in 0..graph.n_nodes() {
                if mask[node] || labels.classes[node].is_some() {
                    continue;
                }
                if graph.neighbors(node).any(|(u, _)| mask[u]) {
                    labels.classes[node] = Some(vec![pred[node]]);
                }
            }
        }
        let labeled_after = labels.n_labeled();

        match &mut combined {
            None => {
                let mut history = outcome;
                history.rounds.push(RoundRecord { round, labeled_before, labeled_after });
                combined = Some(history);
            }
            Some(history) => {
                history.epochs.extend(outcome.epochs);
                history.rounds.push(RoundRecord { round, labeled_before, labeled_after });
                history.params = outcome.params;
            }
        }
    }

    let mut history = combined.expect("rounds >= 1");
    history.final_labels = Some(labels.classes);
    Ok(history)
}
