use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    pub(crate) fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Architecture of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Probability of zeroing a unit of this layer's output during training.
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec { in_dim, out_dim, activation, dropout_rate: 0.0 }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::arg(format!("layer dimensions must be positive, got {}x{}", self.out_dim, self.in_dim)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::arg(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    /// A ReLU MLP ending in an identity (logit) layer.
    pub fn mlp(input: usize, hidden: &[usize], classes: usize) -> Vec<LayerSpec> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(classes);
        let last = dims.len() - 2;
        dims.windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Identity } else { Activation::Relu };
                LayerSpec::new(w[0], w[1], act)
            })
            .collect()
    }
}

/// One dense layer's parameters. `weights` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(spec: LayerSpec) -> Self {
        DenseLayer { spec, weights: vec![0.0; spec.in_dim * spec.out_dim], biases: vec![0.0; spec.out_dim] }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.spec.in_dim + col]
    }

    pub(crate) fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let n = self.spec.in_dim;
        for (row, b) in self.weights.chunks_exact(n).zip(&self.biases) {
            out.push(dot(row, input) + b);
        }
    }
}

/// Dot product with four independent partial sums, so the compiler can keep
/// several multiply-adds in flight.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Parameters of a feed-forward classifier; the unit exchanged between
/// swarm clients during aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<DenseLayer>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(specs: &[LayerSpec], rng: &mut SimRng) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.validate()?;
            let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            let mut layer = DenseLayer::zeros(*spec);
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
            layers.push(layer);
        }
        let model = ModelParams { layers };
        model.validate()?;
        Ok(model)
    }

    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        for spec in specs {
            spec.validate()?;
        }
        let model = ModelParams { layers: specs.iter().copied().map(DenseLayer::zeros).collect() };
        model.validate()?;
        Ok(model)
    }

    /// All-zero parameters with this model's (already valid) layout.
    pub(crate) fn zeros_like(&self) -> ModelParams {
        ModelParams { layers: self.layers.iter().map(|l| DenseLayer::zeros(l.spec)).collect() }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.spec.in_dim)
    }

    pub fn class_count(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec.out_dim)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters in layer order, weights before biases.
    pub fn iter_params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn iter_params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    /// Checks shape chaining, buffer sizes, and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape("model has no layers"));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            let s = layer.spec;
            if layer.weights.len() != s.in_dim * s.out_dim || layer.biases.len() != s.out_dim {
                return Err(Error::shape(format!("layer {k}: buffers do not match {}x{}", s.out_dim, s.in_dim)));
            }
            if k > 0 && self.layers[k - 1].spec.out_dim != s.in_dim {
                return Err(Error::shape(format!(
                    "layer {k} expects {} inputs but layer {} emits {}",
                    s.in_dim,
                    k - 1,
                    self.layers[k - 1].spec.out_dim
                )));
            }
        }
        if self.layers.last().is_some_and(|l| l.spec.dropout_rate > 0.0) {
            return Err(Error::arg("dropout is not allowed on the output layer"));
        }
        if self.iter_params().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("model parameters".into()));
        }
        Ok(())
    }

    /// True when both models have the same layer specs (architecture and
    /// dropout configuration).
    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layers.len() == other.layers.len() && self.layers.iter().zip(&other.layers).all(|(a, b)| a.spec == b.spec)
    }
}

/// Softmax output of a classifier on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionVector(Vec<f64>);

impl PredictionVector {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::arg("empty prediction vector"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::arg("probabilities must lie in [0, 1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::arg(format!("probabilities sum to {sum}")));
        }
        Ok(PredictionVector(probs))
    }

    /// Numerically stable softmax of a logit vector.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric("logits".into()));
        }
        let mut probs: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(PredictionVector(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        self.0.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best }).0
    }

    /// Probabilities sorted in descending order.
    pub fn sorted_desc(&self) -> Vec<f64> {
        let mut v = self.0.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Forward-pass mode. Dropout masks are only drawn in training mode, from
/// the supplied generator.
pub enum Mode<'r> {
    Train(&'r mut SimRng),
    Eval,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Trace {
    /// `inputs[k]` is the input to layer k (post-activation, post-mask).
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pub pre: Vec<Vec<f64>>,
    /// Inverted-dropout multipliers per hidden layer (empty when unused).
    pub masks: Vec<Vec<f64>>,
    pub probs: PredictionVector,
}

pub(crate) fn forward_trace(model: &ModelParams, input: &[f64], mut mode: Mode<'_>) -> Result<Trace> {
    if input.len() != model.input_dim() {
        return Err(Error::shape(format!("input has {} features, model expects {}", input.len(), model.input_dim())));
    }
    let n = model.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    let mut current = input.to_vec();
    for (k, layer) in model.layers.iter().enumerate() {
        let mut z = Vec::with_capacity(layer.spec.out_dim);
        layer.affine(&current, &mut z);
        let mut a: Vec<f64> = z.iter().map(|&v| layer.spec.activation.apply(v)).collect();
        let mut mask = Vec::new();
        let rate = layer.spec.dropout_rate;
        if k + 1 < n && rate > 0.0 {
            if let Mode::Train(rng) = &mut mode {
                let keep = 1.0 / (1.0 - rate);
                mask = (0..a.len()).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
                for (v, m) in a.iter_mut().zip(&mask) {
                    *v *= m;
                }
            }
        }
        inputs.push(std::mem::replace(&mut current, a));
        pre.push(z);
        masks.push(mask);
    }
    if current.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("activations".into()));
    }
    let probs = PredictionVector::softmax(&current)?;
    Ok(Trace { inputs, pre, masks, probs })
}

/// Runs the network on one sample and returns softmax probabilities.
pub fn forward(model: &ModelParams, input: &[f64], mode: Mode<'_>) -> Result<PredictionVector> {
    forward_trace(model, input, mode).map(|t| t.probs)
}
