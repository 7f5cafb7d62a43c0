use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{forward, forward_trace, Mode, ModelParams, PredictionVector};
use super::LOG_CLAMP;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, SimRng};

/// Gradients share the parameter layout of the model they were taken from.
pub type Gradients = ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default)]
    pub l2_lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.05, l2_lambda: 0.0, epochs: 1, batch_size: 16, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg("learning rate must be positive"));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::arg("l2 lambda must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be positive"));
        }
        Ok(())
    }
}

/// Mean cross-entropy over the batch plus `(l2_lambda / 2) * sum(W^2)`
/// (biases are not decayed), and its gradient.
///
/// Dropout masks are drawn from `rng`, so re-running with a cloned generator
/// reproduces the same stochastic loss surface.
pub fn loss_and_gradients(
    model: &ModelParams,
    inputs: &[&[f64]],
    labels: &[usize],
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> Result<(f64, Gradients)> {
    if inputs.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    if inputs.len() != labels.len() {
        return Err(Error::shape(format!("{} inputs but {} labels", inputs.len(), labels.len())));
    }
    let classes = model.class_count();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::arg(format!("label {bad} outside [0, {classes})")));
    }

    let mut grads = model.zeros_like();
    let mut total = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        let trace = forward_trace(model, x, Mode::Train(rng))?;
        let probs = trace.probs.probs();
        total -= probs[y].max(LOG_CLAMP).ln();

        let mut delta: Vec<f64> = probs.to_vec();
        delta[y] -= 1.0;
        for k in (0..model.layers.len()).rev() {
            let layer = &model.layers[k];
            let input = &trace.inputs[k];
            let g = &mut grads.layers[k];
            let n_in = layer.spec.in_dim;
            for (row, &d) in delta.iter().enumerate() {
                // Units switched off by ReLU or dropout contribute nothing.
                if d == 0.0 {
                    continue;
                }
                g.biases[row] += d;
                let gw = &mut g.weights[row * n_in..(row + 1) * n_in];
                for (w, &a) in gw.iter_mut().zip(input) {
                    *w += d * a;
                }
            }
            if k == 0 {
                break;
            }
            let below = &model.layers[k - 1];
            let mut next = vec![0.0; n_in];
            for (row, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let w = &layer.weights[row * n_in..(row + 1) * n_in];
                for (acc, &wv) in next.iter_mut().zip(w) {
                    *acc += wv * d;
                }
            }
            let mask = &trace.masks[k - 1];
            for (j, v) in next.iter_mut().enumerate() {
                *v *= below.spec.activation.derivative(trace.pre[k - 1][j]);
                if !mask.is_empty() {
                    *v *= mask[j];
                }
            }
            delta = next;
        }
    }

    let scale = 1.0 / inputs.len() as f64;
    let mut loss = total * scale;
    for (g, layer) in grads.layers.iter_mut().zip(&model.layers) {
        for (gw, &w) in g.weights.iter_mut().zip(&layer.weights) {
            *gw = *gw * scale + cfg.l2_lambda * w;
        }
        for gb in &mut g.biases {
            *gb *= scale;
        }
        if cfg.l2_lambda > 0.0 {
            loss += 0.5 * cfg.l2_lambda * layer.weights.iter().map(|w| w * w).sum::<f64>();
        }
    }
    if !loss.is_finite() {
        return Err(Error::Numeric("loss".into()));
    }
    Ok((loss, grads))
}

/// `params - learning_rate * grads`. Weight decay is already part of `grads`.
pub fn sgd_step(model: &ModelParams, grads: &Gradients, cfg: &TrainConfig) -> Result<ModelParams> {
    if !model.same_shape(grads)
        || model
            .layers
            .iter()
            .zip(&grads.layers)
            .any(|(a, b)| a.weights.len() != b.weights.len() || a.biases.len() != b.biases.len())
    {
        return Err(Error::shape("gradient layout differs from model"));
    }
    let mut next = model.clone();
    descend(&mut next, grads, cfg.learning_rate);
    Ok(next)
}

fn descend(model: &mut ModelParams, grads: &Gradients, lr: f64) {
    for (layer, g) in model.layers.iter_mut().zip(&grads.layers) {
        for (p, d) in layer.weights.iter_mut().zip(&g.weights) {
            *p -= lr * d;
        }
        for (p, d) in layer.biases.iter_mut().zip(&g.biases) {
            *p -= lr * d;
        }
    }
}

/// Shuffled mini-batch SGD for `cfg.epochs` epochs. All randomness (batch
/// order and dropout masks) comes from `cfg.seed`.
pub fn train_local(model: &ModelParams, data: &Dataset, cfg: &TrainConfig) -> Result<ModelParams> {
    if data.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    cfg.validate()?;
    if data.dim() != model.input_dim() {
        return Err(Error::shape(format!("dataset has {} features, model expects {}", data.dim(), model.input_dim())));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut current = model.clone();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<&[f64]> = chunk.iter().map(|&i| data.row(i)).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.label(i)).collect();
            let (_, grads) = loss_and_gradients(&current, &inputs, &labels, cfg, &mut rng)?;
            descend(&mut current, &grads, cfg.learning_rate);
        }
    }
    current.validate()?;
    Ok(current)
}

/// Eval-mode predictions for every row of `data`.
pub fn predict(model: &ModelParams, data: &Dataset) -> Result<Vec<PredictionVector>> {
    (0..data.len()).map(|i| forward(model, data.row(i), Mode::Eval)).collect()
}

/// Top-1 accuracy in eval mode; 0 for an empty dataset.
pub fn accuracy(model: &ModelParams, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for i in 0..data.len() {
        if forward(model, data.row(i), Mode::Eval)?.argmax() == data.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
