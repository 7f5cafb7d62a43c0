//! Oracles shared by the integration tests, written independently of the
//! library's own numerics.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

use swarmleak::nn::{Activation, LayerSpec, ModelParams, PredictionVector};
use swarmleak::rng::{seeded_rng, SimRng};

pub const H: f64 = 1e-5;

/// Dropout-free forward pass and loss written from scratch, independent of
/// the engine's own code path. Also returns the smallest |pre-activation|
/// seen at a ReLU unit.
pub fn oracle(model: &ModelParams, inputs: &[Vec<f64>], labels: &[usize], l2: f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut nearest_kink = f64::INFINITY;
    for (x, &y) in inputs.iter().zip(labels) {
        let mut a = x.clone();
        for layer in &model.layers {
            let s = layer.spec;
            let mut z = vec![0.0; s.out_dim];
            for (o, zo) in z.iter_mut().enumerate() {
                *zo = layer.biases[o] + (0..s.in_dim).map(|i| layer.weights[o * s.in_dim + i] * a[i]).sum::<f64>();
            }
            if s.activation == Activation::Relu {
                for v in z.iter_mut() {
                    nearest_kink = nearest_kink.min(v.abs());
                    *v = v.max(0.0);
                }
            }
            a = z;
        }
        let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += log_norm - a[y];
    }
    let w2: f64 = model.layers.iter().flat_map(|l| l.weights.iter()).map(|w| w * w).sum();
    (total / inputs.len() as f64 + 0.5 * l2 * w2, nearest_kink)
}

pub fn oracle_loss(model: &ModelParams, inputs: &[Vec<f64>], labels: &[usize], l2: f64) -> f64 {
    oracle(model, inputs, labels, l2).0
}

/// Random 3-layer net and batch. Biases are randomized too (init leaves
/// them at zero). Draws with a ReLU input within 100 steps of its kink are
/// rejected, since central differences are meaningless there.
pub fn random_case(seed: u64) -> (ModelParams, Vec<Vec<f64>>, Vec<usize>, f64) {
    let mut rng = seeded_rng(seed);
    loop {
        let input = rng.random_range(2..=6);
        let hidden = [rng.random_range(2..=6), rng.random_range(2..=6)];
        let classes = rng.random_range(2..=4);
        let mut model = ModelParams::init(&LayerSpec::mlp(input, &hidden, classes), &mut rng).unwrap();
        for layer in &mut model.layers {
            layer.biases.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let batch = rng.random_range(1..=6);
        let inputs: Vec<Vec<f64>> =
            (0..batch).map(|_| (0..input).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
        let l2 = if seed.is_multiple_of(2) { 0.0 } else { 0.05 };
        if oracle(&model, &inputs, &labels, l2).1 > 100.0 * H {
            return (model, inputs, labels, l2);
        }
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences of `loss` over every parameter; returns the worst
/// relative error against the analytic gradient.
pub fn fd_worst(model: &ModelParams, analytic: &ModelParams, loss: impl Fn(&ModelParams) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    let grads: Vec<f64> = analytic.iter_params().copied().collect();
    for (idx, g) in grads.iter().enumerate() {
        let orig = *model.iter_params().nth(idx).unwrap();
        *probe.iter_params_mut().nth(idx).unwrap() = orig + H;
        let up = loss(&probe);
        *probe.iter_params_mut().nth(idx).unwrap() = orig - H;
        let down = loss(&probe);
        *probe.iter_params_mut().nth(idx).unwrap() = orig;
        worst = worst.max(rel_err(*g, (up - down) / (2.0 * H)));
    }
    worst
}

pub fn kernel(x: &[f64], y: &[f64], sigma: f64, exponent: u8) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    let d = if exponent == 2 { d2 } else { d2.sqrt() };
    (-d / (2.0 * sigma * sigma)).exp()
}

/// Naive O(n^2) squared MMD from three separate mean kernel sums.
pub fn brute_mmd2(a: &[PredictionVector], b: &[PredictionVector], sigma: f64, e: u8) -> f64 {
    let mean = |x: &[PredictionVector], y: &[PredictionVector]| {
        let mut s = 0.0;
        for p in x {
            for q in y {
                s += kernel(p.probs(), q.probs(), sigma, e);
            }
        }
        s / (x.len() * y.len()) as f64
    };
    mean(a, a) + mean(b, b) - 2.0 * mean(a, b)
}

pub fn preds(rng: &mut SimRng, n: usize, classes: usize, shift: f64) -> Vec<PredictionVector> {
    (0..n)
        .map(|_| {
            let logits: Vec<f64> =
                (0..classes).map(|k| rng.sample::<f64, _>(StandardNormal) + if k == 0 { shift } else { 0.0 }).collect();
            PredictionVector::softmax(&logits).unwrap()
        })
        .collect()
}
