//! Plain SGD with optional classical momentum.

use crate::error::{Error, Result};
use crate::nn::backward::Gradient;
use crate::nn::params::ModelParams;

/// Stateful SGD: `v <- momentum * v + g`, `theta <- theta - lr * v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Option<Gradient>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be > 0, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(Self { learning_rate, momentum, velocity: None })
    }

    /// Applies one update in place. Aborts with a numeric fault if the
    /// gradient carries non-finite entries.
    pub fn step(&mut self, params: &mut ModelParams, grad: &Gradient) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::NumericFault("non-finite gradient entries in SGD step".into()));
        }
        let velocity = self.velocity.get_or_insert_with(|| Gradient::zeros_like(params));
        for ((layer, v), g) in params.layers.iter_mut().zip(&mut velocity.layers).zip(&grad.layers)
        {
            for ((w, vw), gw) in layer.weights.iter_mut().zip(&mut v.d_weights).zip(&g.d_weights) {
                *vw = self.momentum * *vw + gw;
                *w -= self.learning_rate * *vw;
            }
            for ((b, vb), gb) in layer.bias.iter_mut().zip(&mut v.d_bias).zip(&g.d_bias) {
                *vb = self.momentum * *vb + gb;
                *b -= self.learning_rate * *vb;
            }
        }
        Ok(())
    }
}
