//! Dense feed-forward network parameters.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element-wise activation applied to every hidden layer.
///
/// The output layer is always linear; losses and distances apply softmax
/// themselves where they need it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation `z`, given both `z`
    /// and the activation output `a`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation {other:?} (expected relu or tanh)"
            ))),
        }
    }
}

/// Which layer's activations serve as the representation compared across
/// graph edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReprLayer {
    /// The last hidden layer (default). Requires at least one hidden layer.
    LastHidden,
    /// The output logits. Required by the cross-entropy distance metrics.
    Output,
}

impl std::str::FromStr for ReprLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last-hidden" | "hidden" => Ok(ReprLayer::LastHidden),
            "output" | "logits" => Ok(ReprLayer::Output),
            other => Err(Error::InvalidConfig(format!(
                "unknown representation layer {other:?} (expected last-hidden or output)"
            ))),
        }
    }
}

/// One dense layer: weights stored row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.in_dim + inp]
    }
}

/// Parameters of a dense feed-forward network.
///
/// `layers[k]` maps the activations of layer `k-1` (or the input for `k=0`)
/// to the pre-activations of layer `k`. All layers but the last apply
/// [`Activation`]; the final layer emits raw logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
}

impl ModelParams {
    /// Builds params from explicit layers, checking that dimensions chain
    /// and every entry is finite.
    pub fn new(layers: Vec<DenseLayer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(Error::InvalidConfig(format!("layer {k} has a zero dimension")));
            }
            if layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.bias.len() != layer.out_dim
            {
                return Err(Error::Shape(format!("layer {k} storage does not match its dims")));
            }
            if k > 0 && layers[k - 1].out_dim != layer.in_dim {
                return Err(Error::Shape(format!(
                    "layer {} out_dim {} does not chain into layer {k} in_dim {}",
                    k - 1,
                    layers[k - 1].out_dim,
                    layer.in_dim
                )));
            }
            if layer.weights.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NumericFault(format!("layer {k} contains non-finite entries")));
            }
        }
        Ok(Self { layers, activation })
    }

    /// Glorot-uniform initialization: weights drawn from
    /// `U[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`, biases zero.
    /// Identical seeds produce bit-identical parameters.
    pub fn init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "layer_dims needs at least an input and an output dimension, got {layer_dims:?}"
            )));
        }
        if let Some(&bad) = layer_dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidConfig(format!("layer dimension must be >= 1, got {bad}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let weights = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            layers.push(DenseLayer {
                in_dim: fan_in,
                out_dim: fan_out,
                weights,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(Self { layers, activation })
    }

    /// Input dimension expected by [`crate::nn::forward`].
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Output dimension (number of logits).
    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("validated non-empty").out_dim
    }

    /// Number of hidden layers (layers whose output passes the activation).
    pub fn n_hidden(&self) -> usize {
        self.layers.len() - 1
    }

    /// Layer sizes as `[input, hidden.., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    /// Total number of scalar parameters.
    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat read access used by the finite-difference oracle. Index order is
    /// layer 0 weights, layer 0 bias, layer 1 weights, ...
    pub fn get_flat(&self, index: usize) -> f64 {
        let mut i = index;
        for layer in &self.layers {
            if i < layer.weights.len() {
                return layer.weights[i];
            }
            i -= layer.weights.len();
            if i < layer.bias.len() {
                return layer.bias[i];
            }
            i -= layer.bias.len();
        }
        panic!("flat index {index} out of range");
    }

    /// Flat write access; same index order as [`ModelParams::get_flat`].
    pub fn set_flat(&mut self, index: usize, value: f64) {
        let mut i = index;
        for layer in &mut self.layers {
            if i < layer.weights.len() {
                layer.weights[i] = value;
                return;
            }
            i -= layer.weights.len();
            if i < layer.bias.len() {
                layer.bias[i] = value;
                return;
            }
            i -= layer.bias.len();
        }
        panic!("flat index {index} out of range");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = ModelParams::init(&[2, 3, 2], Activation::Relu, 7).unwrap();
        let b = ModelParams::init(&[2, 3, 2], Activation::Relu, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_rejects_too_few_layers() {
        assert!(matches!(
            ModelParams::init(&[4], Activation::Relu, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn init_rejects_zero_dim() {
        assert!(matches!(
            ModelParams::init(&[3, 0, 2], Activation::Tanh, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn init_respects_glorot_bound() {
        // First layer of [3, 5, 4] has fan_in 3, fan_out 5.
        let params = ModelParams::init(&[3, 5, 4], Activation::Tanh, 1).unwrap();
        let bound0 = (6.0_f64 / 8.0).sqrt();
        assert!(params.layers[0].weights.iter().all(|w| w.abs() <= bound0));
        let bound1 = (6.0_f64 / 9.0).sqrt();
        assert!(params.layers[1].weights.iter().all(|w| w.abs() <= bound1));
        assert!(params.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn flat_indexing_round_trips() {
        let mut params = ModelParams::init(&[2, 3, 2], Activation::Relu, 3).unwrap();
        let n = params.n_params();
        assert_eq!(n, 2 * 3 + 3 + 3 * 2 + 2);
        for i in 0..n {
            let v = params.get_flat(i);
            params.set_flat(i, v + 1.0);
            assert_eq!(params.get_flat(i), v + 1.0);
            params.set_flat(i, v);
        }
    }

    #[test]
    fn new_rejects_broken_chain() {
        let layers = vec![
            DenseLayer { in_dim: 2, out_dim: 3, weights: vec![0.0; 6], bias: vec![0.0; 3] },
            DenseLayer { in_dim: 4, out_dim: 1, weights: vec![0.0; 4], bias: vec![0.0; 1] },
        ];
        assert!(matches!(ModelParams::new(layers, Activation::Relu), Err(Error::Shape(_))));
    }
}
