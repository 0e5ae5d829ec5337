//! Minibatch losses as weighted sums of supervised and distance terms.
//!
//! A [`CompositeLoss`] references inputs by index so a batch can share
//! forward passes between terms that touch the same node.

use crate::error::{Error, Result};
use crate::nn::forward::{forward, ForwardTrace};
use crate::nn::loss::{hidden_distance_grad, supervised_loss_grad, DistanceMetric, Target};
use crate::nn::params::{ModelParams, ReprLayer};

/// One additive term of a minibatch loss.
#[derive(Debug, Clone)]
pub enum LossTerm {
    /// `weight * c(g(x[input]), target)`
    Supervised { input: usize, target: Target, weight: f64 },
    /// `weight * d(h(x[left]), h(x[right]))`
    Distance {
        left: usize,
        right: usize,
        metric: DistanceMetric,
        repr: ReprLayer,
        weight: f64,
    },
}

/// A weighted sum of loss terms over a shared list of inputs.
#[derive(Debug, Clone, Default)]
pub struct CompositeLoss {
    pub terms: Vec<LossTerm>,
}

impl CompositeLoss {
    pub fn new() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn supervised(mut self, input: usize, target: Target, weight: f64) -> Self {
        self.terms.push(LossTerm::Supervised { input, target, weight });
        self
    }

    pub fn distance(
        mut self,
        left: usize,
        right: usize,
        metric: DistanceMetric,
        repr: ReprLayer,
        weight: f64,
    ) -> Self {
        self.terms.push(LossTerm::Distance { left, right, metric, repr, weight });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub(crate) fn check_term(term: &LossTerm, n_inputs: usize) -> Result<()> {
    match term {
        LossTerm::Supervised { input, .. } if *input >= n_inputs => Err(Error::Shape(format!(
            "loss term references input {input} but only {n_inputs} inputs were given"
        ))),
        LossTerm::Distance { left, right, metric, repr, .. } => {
            if *left >= n_inputs || *right >= n_inputs {
                return Err(Error::Shape(format!(
                    "distance term ({left}, {right}) out of range for {n_inputs} inputs"
                )));
            }
            if metric.requires_output_repr() && *repr != ReprLayer::Output {
                return Err(Error::InvalidConfig(
                    "cross-entropy distances are only defined on the output logits".into(),
                ));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Runs one forward pass per input.
pub fn forward_all(params: &ModelParams, inputs: &[Vec<f64>]) -> Result<Vec<ForwardTrace>> {
    inputs.iter().map(|x| forward(params, x)).collect()
}

/// Evaluates the composite loss at `params`.
pub fn evaluate_composite(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    loss: &CompositeLoss,
) -> Result<f64> {
    let traces = forward_all(params, inputs)?;
    evaluate_composite_on_traces(&traces, loss)
}

/// Same as [`evaluate_composite`] but on precomputed traces.
pub fn evaluate_composite_on_traces(traces: &[ForwardTrace], loss: &CompositeLoss) -> Result<f64> {
    let mut total = 0.0;
    for term in &loss.terms {
        check_term(term, traces.len())?;
        match term {
            LossTerm::Supervised { input, target, weight } => {
                let (value, _) = supervised_loss_grad(traces[*input].logits(), target)?;
                total += weight * value;
            }
            LossTerm::Distance { left, right, metric, repr, weight } => {
                let h_u = traces[*left].repr(*repr)?;
                let h_v = traces[*right].repr(*repr)?;
                let (value, _, _) = hidden_distance_grad(h_u, h_v, *metric)?;
                total += weight * value;
            }
        }
    }
    Ok(total)
}
