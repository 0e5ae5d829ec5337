//! The graph-regularized training objective, in its node-sum form and its
//! edge-decomposed form.
//!
//! The node-sum form is the supervised cost over labeled nodes plus one
//! distance penalty per edge, weighted by the edge weight and the
//! alpha coefficient of its kind:
//!
//! ```text
//! sum_{n labeled} c(g(x_n), y_n)
//!   + a_ll * sum_{(u,v) in E_LL} w_uv d(h(x_u), h(x_v))
//!   + a_lu * sum_{(u,v) in E_LU} w_uv d(h(x_u), h(x_v))
//!   + a_uu * sum_{(u,v) in E_UU} w_uv d(h(x_u), h(x_v))
//! ```
//!
//! The edge-decomposed form spreads each labeled node's supervised cost
//! across its incident edges (`c_uv` splits by the incident counts `|u|`,
//! `|v|`), which is what makes unbiased edge minibatching possible. Labeled
//! nodes with no incident edges never appear in an edge term, so their
//! supervised cost is added back as a separate sum; with that correction
//! the two forms are equal on every graph.

use crate::error::{Error, Result};
use crate::graph::{BatchEdge, EdgeBatch, EdgeKind, EdgePartition, Graph, NodeFeatures};
use crate::nn::{
    evaluate_composite, forward, hidden_distance, supervised_loss, CompositeLoss, ForwardTrace,
    ModelParams, Target,
};
use crate::trainer::{Labels, NgmConfig};

/// Value of each objective component; `total` applies the alpha weights
/// (and honors `drop_uu`).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObjectiveBreakdown {
    pub supervised: f64,
    pub reg_ll: f64,
    pub reg_lu: f64,
    pub reg_uu: f64,
    pub total: f64,
}

pub(crate) fn target_for(labels: &Labels, node: usize, multi_label: bool) -> Result<Target> {
    let set = labels.classes[node]
        .as_ref()
        .ok_or_else(|| Error::Data(format!("node {node} has no label")))?;
    if multi_label {
        let mut hot = vec![false; labels.n_classes];
        for &c in set {
            hot[c] = true;
        }
        Ok(Target::MultiHot(hot))
    } else {
        Ok(Target::Class(set[0]))
    }
}

fn check_data(graph: &Graph, features: &NodeFeatures, labels: &Labels) -> Result<()> {
    if features.n_rows() != graph.n_nodes() {
        return Err(Error::Data(format!(
            "feature matrix has {} rows, graph has {} nodes",
            features.n_rows(),
            graph.n_nodes()
        )));
    }
    if labels.classes.len() != graph.n_nodes() {
        return Err(Error::Data(format!(
            "label list has {} entries, graph has {} nodes",
            labels.classes.len(),
            graph.n_nodes()
        )));
    }
    labels.validate()
}

/// Supervised cost over labeled nodes, summed in node-id order.
pub fn supervised_cost(
    params: &ModelParams,
    features: &NodeFeatures,
    labels: &Labels,
    multi_label: bool,
) -> Result<f64> {
    labels.validate()?;
    let mut total = 0.0;
    for node in 0..labels.classes.len() {
        if labels.classes[node].is_none() {
            continue;
        }
        let trace = forward(params, &features.row_dense(node))?;
        let target = target_for(labels, node, multi_label)?;
        total += supervised_loss(trace.logits(), &target)?;
    }
    Ok(total)
}

/// Evaluates all components of the objective. Runs one forward pass per
/// node and reuses the traces across the supervised and edge terms.
pub fn objective_breakdown(
    params: &ModelParams,
    graph: &Graph,
    partition: &EdgePartition,
    features: &NodeFeatures,
    labels: &Labels,
    config: &NgmConfig,
) -> Result<ObjectiveBreakdown> {
    config.validate()?;
    check_data(graph, features, labels)?;
    let traces: Vec<ForwardTrace> = (0..graph.n_nodes())
        .map(|node| forward(params, &features.row_dense(node)))
        .collect::<Result<_>>()?;

    let mut supervised = 0.0;
    for node in 0..graph.n_nodes() {
        if labels.classes[node].is_none() {
            continue;
        }
        let target = target_for(labels, node, config.multi_label)?;
        supervised += supervised_loss(traces[node].logits(), &target)?;
    }

    let reg_sum = |edge_indices: &[usize]| -> Result<f64> {
        let mut acc = 0.0;
        for &e in edge_indices {
            let edge = graph.edge(e);
            let h_u = traces[edge.u].repr(config.repr)?;
            let h_v = traces[edge.v].repr(config.repr)?;
            acc += edge.weight * hidden_distance(h_u, h_v, config.metric)?;
        }
        Ok(acc)
    };
    let reg_ll = reg_sum(&partition.ll)?;
    let reg_lu = reg_sum(&partition.lu)?;
    let reg_uu = reg_sum(&partition.uu)?;

    let mut total = supervised + config.alpha_ll * reg_ll + config.alpha_lu * reg_lu;
    if !config.drop_uu {
        total += config.alpha_uu * reg_uu;
    }
    Ok(ObjectiveBreakdown { supervised, reg_ll, reg_lu, reg_uu, total })
}

/// The node-sum objective value.
pub fn full_objective(
    params: &ModelParams,
    graph: &Graph,
    partition: &EdgePartition,
    features: &NodeFeatures,
    labels: &Labels,
    config: &NgmConfig,
) -> Result<f64> {
    Ok(objective_breakdown(params, graph, partition, features, labels, config)?.total)
}

/// Assembles the loss of one training step: the edge-decomposed terms of
/// `batch` plus plain supervised terms for `extra_nodes`.
///
/// Returns the batch inputs (one forward per distinct node), the loss, and
/// the item count used for batch-mean normalization.
pub(crate) fn build_batch_loss(
    batch: &[BatchEdge],
    extra_nodes: &[usize],
    features: &NodeFeatures,
    labels: &Labels,
    config: &NgmConfig,
) -> Result<(Vec<Vec<f64>>, CompositeLoss, usize)> {
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    let mut node_slot: Vec<Option<usize>> = vec![None; features.n_rows()];
    let mut slot_of = |node: usize, inputs: &mut Vec<Vec<f64>>| -> usize {
        if let Some(slot) = node_slot[node] {
            return slot;
        }
        let slot = inputs.len();
        inputs.push(features.row_dense(node));
        node_slot[node] = Some(slot);
        slot
    };

    let mut loss = CompositeLoss::new();
    for edge in batch {
        let alpha = match edge.kind {
            EdgeKind::LabeledLabeled => config.alpha_ll,
            EdgeKind::LabeledUnlabeled => config.alpha_lu,
            EdgeKind::UnlabeledUnlabeled => {
                if config.drop_uu {
                    continue;
                }
                config.alpha_uu
            }
        };
        let u_slot = slot_of(edge.u, &mut inputs);
        let v_slot = slot_of(edge.v, &mut inputs);
        let coeff = alpha * edge.weight;
        if coeff != 0.0 {
            loss = loss.distance(u_slot, v_slot, config.metric, config.repr, coeff);
        }
        // Supervised cost splits: 1/|u| of a labeled endpoint's cost per
        // incident edge.
        let mut split = |node: usize, slot: usize, incident: usize| -> Result<()> {
            if labels.classes[node].is_none() {
                return Ok(());
            }
            if incident == 0 {
                return Err(Error::Data(format!(
                    "internal error: labeled node {node} with zero incident edges in an edge term"
                )));
            }
            let target = target_for(labels, node, config.multi_label)?;
            loss.terms.push(crate::nn::LossTerm::Supervised {
                input: slot,
                target,
                weight: 1.0 / incident as f64,
            });
            Ok(())
        };
        match edge.kind {
            EdgeKind::LabeledLabeled => {
                split(edge.u, u_slot, edge.incident_u)?;
                split(edge.v, v_slot, edge.incident_v)?;
            }
            EdgeKind::LabeledUnlabeled => {
                // Exactly one endpoint is labeled; split() skips the other.
                split(edge.u, u_slot, edge.incident_u)?;
                split(edge.v, v_slot, edge.incident_v)?;
            }
            EdgeKind::UnlabeledUnlabeled => {}
        }
    }

    for &node in extra_nodes {
        let slot = inputs.len();
        inputs.push(features.row_dense(node));
        let target = target_for(labels, node, config.multi_label)?;
        loss = loss.supervised(slot, target, 1.0);
    }

    let dropped_uu = if config.drop_uu {
        batch.iter().filter(|e| e.kind == EdgeKind::UnlabeledUnlabeled).count()
    } else {
        0
    };
    let count = batch.len() - dropped_uu + extra_nodes.len();
    Ok((inputs, loss, count))
}

/// Unnormalized objective contribution of one edge batch plus extra
/// supervised nodes; summing this over an epoch that covers every edge once
/// (plus the isolated labeled nodes once) reproduces
/// [`edge_decomposed_objective`].
pub fn edge_batch_objective(
    params: &ModelParams,
    batch: &[BatchEdge],
    extra_nodes: &[usize],
    features: &NodeFeatures,
    labels: &Labels,
    config: &NgmConfig,
) -> Result<f64> {
    let (inputs, loss, _) = build_batch_loss(batch, extra_nodes, features, labels, config)?;
    evaluate_composite(params, &inputs, &loss)
}

/// Labeled nodes with no incident edges. Their supervised cost is invisible
/// to every edge term and enters as a separate sum.
pub fn isolated_labeled_nodes(graph: &Graph, labels: &Labels) -> Vec<usize> {
    (0..graph.n_nodes())
        .filter(|&n| labels.classes[n].is_some() && graph.incident_count(n) == 0)
        .collect()
}

/// The edge-decomposed objective over batches covering one epoch, plus the
/// isolated-labeled-node correction.
pub fn edge_decomposed_objective(
    params: &ModelParams,
    graph: &Graph,
    features: &NodeFeatures,
    labels: &Labels,
    batches: &[EdgeBatch],
    config: &NgmConfig,
) -> Result<f64> {
    config.validate()?;
    check_data(graph, features, labels)?;
    let mut total = 0.0;
    for batch in batches {
        total += edge_batch_objective(params, &batch.edges, &[], features, labels, config)?;
    }
    for node in isolated_labeled_nodes(graph, labels) {
        let trace = forward(params, &features.row_dense(node))?;
        let target = target_for(labels, node, config.multi_label)?;
        total += supervised_loss(trace.logits(), &target)?;
    }
    Ok(total)
}
