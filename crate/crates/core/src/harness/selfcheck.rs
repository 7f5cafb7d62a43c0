//! Numerical self-tests run by `gradcheck` and `mmdcheck`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::attacks::{mmd_squared, GaussianKernel};
use crate::error::Result;
use crate::nn::{loss_and_gradients, LayerSpec, ModelParams, PredictionVector, TrainConfig};
use crate::rng::{derive_seed, seeded_rng, SimRng};

pub const GRAD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const MMD_TOLERANCE: f64 = 1e-12;

/// Gradient entries smaller than this are compared on an absolute scale.
const GRAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn random_model(rng: &mut SimRng, dropout: bool) -> Result<ModelParams> {
    let input = rng.random_range(2..=6);
    let depth = rng.random_range(1..=2);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=7)).collect();
    let classes = rng.random_range(2..=5);
    let mut specs = LayerSpec::mlp(input, &hidden, classes);
    if dropout {
        specs[0].dropout_rate = 0.3;
    }
    // Nonzero biases keep hidden pre-activations off the ReLU kink, where
    // central differences do not apply.
    let mut model = ModelParams::init(&specs, rng)?;
    for layer in &mut model.layers {
        layer.biases.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    Ok(model)
}

/// Central finite differences of the loss against backprop, on `trials`
/// random models and batches. Dropout masks are pinned by reseeding.
pub fn gradcheck(trials: usize, seed: u64) -> Result<CheckSummary> {
    let mut worst: f64 = 0.0;
    for t in 0..trials as u64 {
        let mut rng = seeded_rng(derive_seed(seed, "gradcheck", t));
        let model = random_model(&mut rng, t % 3 == 2)?;
        let batch = rng.random_range(1..=5);
        let inputs: Vec<Vec<f64>> =
            (0..batch).map(|_| (0..model.input_dim()).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..model.class_count())).collect();
        let views: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let cfg = TrainConfig { l2_lambda: if t % 2 == 1 { 0.01 } else { 0.0 }, ..TrainConfig::default() };
        let mask_seed = derive_seed(seed, "gradcheck-mask", t);
        let loss_at = |m: &ModelParams| -> Result<f64> {
            Ok(loss_and_gradients(m, &views, &labels, &cfg, &mut seeded_rng(mask_seed))?.0)
        };
        let (_, grads) = loss_and_gradients(&model, &views, &labels, &cfg, &mut seeded_rng(mask_seed))?;
        let analytic: Vec<f64> = grads.iter_params().copied().collect();
        let mut probe = model.clone();
        for (i, &a) in analytic.iter().enumerate() {
            let orig = *probe.iter_params().nth(i).expect("index in range");
            *probe.iter_params_mut().nth(i).expect("index in range") = orig + GRAD_STEP;
            let up = loss_at(&probe)?;
            *probe.iter_params_mut().nth(i).expect("index in range") = orig - GRAD_STEP;
            let down = loss_at(&probe)?;
            *probe.iter_params_mut().nth(i).expect("index in range") = orig;
            let numeric = (up - down) / (2.0 * GRAD_STEP);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(CheckSummary {
        name: "gradcheck",
        trials,
        max_error: worst,
        tolerance: GRAD_TOLERANCE,
        passed: worst < GRAD_TOLERANCE,
    })
}

fn random_preds(rng: &mut SimRng, n: usize, classes: usize, shift: f64) -> Result<Vec<PredictionVector>> {
    (0..n)
        .map(|_| {
            let logits: Vec<f64> = (0..classes)
                .map(|k| 2.0 * rng.sample::<f64, _>(StandardNormal) + if k == 0 { shift } else { 0.0 })
                .collect();
            PredictionVector::softmax(&logits)
        })
        .collect()
}

/// Squared MMD as one signed double sum over the pooled points, with
/// weight `1/n` for `a` and `-1/m` for `b`.
fn double_sum(a: &[PredictionVector], b: &[PredictionVector], k: &GaussianKernel) -> f64 {
    let pooled: Vec<(&PredictionVector, f64)> =
        a.iter().map(|p| (p, 1.0 / a.len() as f64)).chain(b.iter().map(|p| (p, -1.0 / b.len() as f64))).collect();
    let mut s = 0.0;
    for (x, wx) in &pooled {
        for (y, wy) in &pooled {
            s += wx * wy * k.eval(x.probs(), y.probs());
        }
    }
    s
}

/// Kernel-trick MMD against the signed double sum, plus the identity and
/// symmetry checks, on `trials` random set pairs.
pub fn mmdcheck(trials: usize, seed: u64) -> Result<CheckSummary> {
    let mut worst: f64 = 0.0;
    for t in 0..trials as u64 {
        let mut rng = seeded_rng(derive_seed(seed, "mmdcheck", t));
        let classes = rng.random_range(2..=10);
        let n = rng.random_range(1..=200);
        let m = rng.random_range(1..=200);
        let a = random_preds(&mut rng, n, classes, 0.0)?;
        let shift = rng.random_range(0.0..2.0);
        let b = random_preds(&mut rng, m, classes, shift)?;
        let kernel = GaussianKernel { sigma: rng.random_range(0.2..2.0), exponent: if t % 2 == 0 { 2 } else { 1 } };
        let fast = mmd_squared(&a, &b, &kernel);
        worst = worst.max((fast - double_sum(&a, &b, &kernel)).abs()).max((fast - mmd_squared(&b, &a, &kernel)).abs());
        let same = mmd_squared(&a, &a, &kernel).max(0.0).sqrt();
        if same > 1e-9 {
            worst = worst.max(same);
        }
    }
    Ok(CheckSummary {
        name: "mmdcheck",
        trials,
        max_error: worst,
        tolerance: MMD_TOLERANCE,
        passed: worst <= MMD_TOLERANCE,
    })
}
