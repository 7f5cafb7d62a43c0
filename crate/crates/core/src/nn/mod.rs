//! A small deterministic feed-forward network engine: dense layers, ReLU,
//! inverted dropout, softmax cross-entropy, and SGD with L2 weight decay.
//!
//! The same engine backs the swarm clients' classifiers and the attack
//! models.

mod model;
mod train;

pub use model::{forward, Activation, DenseLayer, LayerSpec, Mode, ModelParams, PredictionVector};
pub use train::{accuracy, loss_and_gradients, predict, sgd_step, train_local, Gradients, TrainConfig};

/// Floor applied inside every logarithm of a probability.
pub const LOG_CLAMP: f64 = 1e-12;
