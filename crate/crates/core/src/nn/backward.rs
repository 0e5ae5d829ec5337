//! Reverse-mode gradients for composite losses, plus the central
//! finite-difference oracle used to check them.

use crate::error::{Error, Result};
use crate::nn::composite::{check_term, forward_all, CompositeLoss, LossTerm};
use crate::nn::forward::ForwardTrace;
use crate::nn::loss::{hidden_distance_grad, supervised_loss_grad};
use crate::nn::params::{ModelParams, ReprLayer};

/// Gradient with the same shape as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGradient {
                    d_weights: vec![0.0; l.weights.len()],
                    d_bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for v in layer.d_weights.iter_mut().chain(layer.d_bias.iter_mut()) {
                *v *= factor;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.d_weights.iter_mut().zip(&b.d_weights) {
                *x += y;
            }
            for (x, y) in a.d_bias.iter_mut().zip(&b.d_bias) {
                *x += y;
            }
        }
    }

    pub fn iter_flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.d_weights.iter().chain(l.d_bias.iter()).copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.iter_flat().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter_flat().all(|v| v.is_finite())
    }
}

/// Gradient of the composite loss with respect to every parameter.
///
/// Distance terms propagate into both endpoint traces. Returns the loss
/// value alongside the gradient so callers get both from one pass.
pub fn backward_composite(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    loss: &CompositeLoss,
) -> Result<(f64, Gradient)> {
    let traces = forward_all(params, inputs)?;
    backward_composite_on_traces(params, &traces, loss)
}

/// Same as [`backward_composite`] on precomputed traces.
pub fn backward_composite_on_traces(
    params: &ModelParams,
    traces: &[ForwardTrace],
    loss: &CompositeLoss,
) -> Result<(f64, Gradient)> {
    let n_layers = params.layers.len();
    // Per trace, per layer: accumulated dL/d(activation of that layer).
    let mut seeds: Vec<Vec<Vec<f64>>> = traces
        .iter()
        .map(|t| t.activations.iter().map(|a| vec![0.0; a.len()]).collect())
        .collect();
    let mut touched = vec![false; traces.len()];

    let mut value = 0.0;
    for term in &loss.terms {
        check_term(term, traces.len())?;
        match term {
            LossTerm::Supervised { input, target, weight } => {
                let (v, grad) = supervised_loss_grad(traces[*input].logits(), target)?;
                value += weight * v;
                let seed = &mut seeds[*input][n_layers - 1];
                for (s, g) in seed.iter_mut().zip(&grad) {
                    *s += weight * g;
                }
                touched[*input] = true;
            }
            LossTerm::Distance { left, right, metric, repr, weight } => {
                let h_u = traces[*left].repr(*repr)?;
                let h_v = traces[*right].repr(*repr)?;
                let (v, gu, gv) = hidden_distance_grad(h_u, h_v, *metric)?;
                value += weight * v;
                let layer = match repr {
                    ReprLayer::Output => n_layers - 1,
                    ReprLayer::LastHidden => n_layers - 2,
                };
                for (s, g) in seeds[*left][layer].iter_mut().zip(&gu) {
                    *s += weight * g;
                }
                for (s, g) in seeds[*right][layer].iter_mut().zip(&gv) {
                    *s += weight * g;
                }
                touched[*left] = true;
                touched[*right] = true;
            }
        }
    }

    let mut grad = Gradient::zeros_like(params);
    for (t, trace) in traces.iter().enumerate() {
        if touched[t] {
            backprop_trace(params, trace, &seeds[t], &mut grad);
        }
    }
    Ok((value, grad))
}

/// Backpropagates one trace given dL/d(activation) seeds per layer and
/// accumulates into `grad`.
fn backprop_trace(
    params: &ModelParams,
    trace: &ForwardTrace,
    seeds: &[Vec<f64>],
    grad: &mut Gradient,
) {
    let n_layers = params.layers.len();
    // dL/d(activation of the layer currently being processed).
    let mut grad_act = seeds[n_layers - 1].clone();

    for k in (0..n_layers).rev() {
        let layer = &params.layers[k];
        // Output layer is linear; hidden layers apply the activation.
        let delta: Vec<f64> = if k == n_layers - 1 {
            grad_act.clone()
        } else {
            let z = &trace.pre_activations[k];
            let a = &trace.activations[k];
            grad_act
                .iter()
                .enumerate()
                .map(|(i, &g)| g * params.activation.derivative(z[i], a[i]))
                .collect()
        };

        let below: &[f64] = if k == 0 { &trace.input } else { &trace.activations[k - 1] };
        let layer_grad = &mut grad.layers[k];
        for (o, &d) in delta.iter().enumerate() {
            layer_grad.d_bias[o] += d;
            let row = &mut layer_grad.d_weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (w, &x) in row.iter_mut().zip(below) {
                *w += d * x;
            }
        }

        if k > 0 {
            let mut next = seeds[k - 1].clone();
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (n, &w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            grad_act = next;
        }
    }
}

/// Central-difference gradient of an arbitrary scalar function of the
/// parameters, one coordinate at a time.
pub fn finite_diff_grad<F>(params: &ModelParams, loss: F, epsilon: f64) -> Result<Gradient>
where
    F: Fn(&ModelParams) -> Result<f64>,
{
    if epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
    }
    let mut work = params.clone();
    let mut grad = Gradient::zeros_like(params);
    let mut flat = 0usize;
    for (k, layer) in params.layers.iter().enumerate() {
        for i in 0..layer.weights.len() + layer.bias.len() {
            let original = work.get_flat(flat);
            work.set_flat(flat, original + epsilon);
            let plus = loss(&work)?;
            work.set_flat(flat, original - epsilon);
            let minus = loss(&work)?;
            work.set_flat(flat, original);
            let d = (plus - minus) / (2.0 * epsilon);
            if i < layer.weights.len() {
                grad.layers[k].d_weights[i] = d;
            } else {
                grad.layers[k].d_bias[i - layer.weights.len()] = d;
            }
            flat += 1;
        }
    }
    Ok(grad)
}

/// Max-norm relative error between two gradients, scaled by the larger
/// gradient magnitude (floored at 1).
pub fn gradient_relative_error(a: &Gradient, b: &Gradient) -> f64 {
    let mut max_diff = 0.0f64;
    for (x, y) in a.iter_flat().zip(b.iter_flat()) {
        max_diff = max_diff.max((x - y).abs());
    }
    max_diff / a.max_abs().max(b.max_abs()).max(1.0)
}
