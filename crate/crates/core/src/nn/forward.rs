//! Forward pass with cached intermediates.

use crate::error::{Error, Result};
use crate::nn::params::{ModelParams, ReprLayer};

/// All intermediates of one forward evaluation.
///
/// `pre_activations[k]` and `activations[k]` correspond to layer `k`;
/// for the final layer the two are equal (linear output).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Output logits `g(x)`.
    pub fn logits(&self) -> &[f64] {
        self.activations.last().expect("non-empty network")
    }

    /// The representation `h(x)` selected by `repr`.
    pub fn repr(&self, repr: ReprLayer) -> Result<&[f64]> {
        match repr {
            ReprLayer::Output => Ok(self.logits()),
            ReprLayer::LastHidden => {
                let n = self.activations.len();
                if n < 2 {
                    return Err(Error::InvalidConfig(
                        "last-hidden representation requires at least one hidden layer".into(),
                    ));
                }
                Ok(&self.activations[n - 2])
            }
        }
    }
}

/// Runs the network on `x`, keeping every intermediate needed by the
/// backward pass.
pub fn forward(params: &ModelParams, x: &[f64]) -> Result<ForwardTrace> {
    if x.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input length {} does not match network input dim {}",
            x.len(),
            params.input_dim()
        )));
    }
    let n_layers = params.layers.len();
    let mut pre_activations = Vec::with_capacity(n_layers);
    let mut activations = Vec::with_capacity(n_layers);
    let mut current: &[f64] = x;
    for (k, layer) in params.layers.iter().enumerate() {
        let mut z = layer.bias.clone();
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut acc = *zo;
            for (w, xi) in row.iter().zip(current) {
                acc += w * xi;
            }
            *zo = acc;
        }
        let a = if k + 1 == n_layers {
            z.clone()
        } else {
            z.iter().map(|&v| params.activation.apply(v)).collect()
        };
        pre_activations.push(z);
        activations.push(a);
        current = activations.last().expect("just pushed");
    }
    Ok(ForwardTrace { input: x.to_vec(), pre_activations, activations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{Activation, DenseLayer};

    #[test]
    fn zero_params_give_zero_logits() {
        let params = ModelParams::new(
            vec![
                DenseLayer { in_dim: 3, out_dim: 4, weights: vec![0.0; 12], bias: vec![0.0; 4] },
                DenseLayer { in_dim: 4, out_dim: 2, weights: vec![0.0; 8], bias: vec![0.0; 2] },
            ],
            Activation::Relu,
        )
        .unwrap();
        let trace = forward(&params, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(trace.logits(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let params = ModelParams::new(
            vec![DenseLayer {
                in_dim: 2,
                out_dim: 2,
                weights: vec![1.0, 0.0, 0.0, 1.0],
                bias: vec![0.0, 0.0],
            }],
            Activation::Tanh,
        )
        .unwrap();
        let trace = forward(&params, &[1.0, 2.0]).unwrap();
        assert_eq!(trace.logits(), &[1.0, 2.0]);
        // No hidden layer: last-hidden representation is unavailable.
        assert!(trace.repr(ReprLayer::LastHidden).is_err());
        assert_eq!(trace.repr(ReprLayer::Output).unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let params = ModelParams::init(&[3, 2], Activation::Relu, 0).unwrap();
        assert!(matches!(forward(&params, &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    // Independent straight-line evaluation of the same architecture.
    fn straight_line(params: &ModelParams, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for (k, layer) in params.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.out_dim];
            for o in 0..layer.out_dim {
                let mut sum = layer.bias[o];
                for i in 0..layer.in_dim {
                    sum += layer.weight(o, i) * v[i];
                }
                next[o] = if k + 1 == params.layers.len() {
                    sum
                } else {
                    match params.activation {
                        Activation::Relu => sum.max(0.0),
                        Activation::Tanh => sum.tanh(),
                    }
                };
            }
            v = next;
        }
        v
    }

    #[test]
    fn matches_independent_evaluation() {
        let params = ModelParams::init(&[4, 6, 5, 3], Activation::Tanh, 11).unwrap();
        let x = [0.3, -1.2, 0.8, 2.1];
        let trace = forward(&params, &x).unwrap();
        let expected = straight_line(&params, &x);
        for (a, b) in trace.logits().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let h = trace.repr(ReprLayer::LastHidden).unwrap();
        assert_eq!(h.len(), 5);
    }
}
