//! Dense feed-forward networks with deterministic forward/backward passes.
//!
//! The pieces are deliberately small and composable: [`forward`] caches a
//! full [`ForwardTrace`], [`CompositeLoss`] assembles arbitrary weighted
//! sums of supervised and distance terms over a batch, and
//! [`backward_composite`] differentiates the exact scalar that
//! [`evaluate_composite`] returns. [`finite_diff_grad`] is the independent
//! oracle the gradients are checked against.

mod backward;
mod composite;
mod forward;
mod loss;
mod optim;
mod params;

pub use backward::{
    backward_composite, backward_composite_on_traces, finite_diff_grad, gradient_relative_error,
    Gradient, LayerGradient,
};
pub use composite::{
    evaluate_composite, evaluate_composite_on_traces, forward_all, CompositeLoss, LossTerm,
};
pub use forward::{forward, ForwardTrace};
pub use loss::{
    hidden_distance, hidden_distance_grad, log_sum_exp, softmax, supervised_loss,
    supervised_loss_grad, DistanceMetric, Target,
};
pub use optim::Sgd;
pub use params::{Activation, DenseLayer, ModelParams, ReprLayer};
