use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

use swarmleak::attacks::{mmd, mmd_squared, Bandwidth, GaussianKernel, MmdConfig, MmdReference};
use swarmleak::nn::PredictionVector;
use swarmleak::rng::seeded_rng;

mod common;
use common::{brute_mmd2, preds};

#[test]
fn kernel_trick_matches_brute_force() {
    let start = Instant::now();
    for t in 0..50u64 {
        let mut rng = seeded_rng(900 + t);
        let classes = rng.random_range(2..=10);
        let n = rng.random_range(1..=200);
        let m = rng.random_range(1..=200);
        let shift = rng.random_range(0.0..2.0);
        let a = preds(&mut rng, n, classes, 0.0);
        let b = preds(&mut rng, m, classes, shift);
        let exponent = if t % 2 == 0 { 2 } else { 1 };
        let sigma = if t % 3 == 0 {
            let cfg = MmdConfig { sigma: Bandwidth::MedianHeuristic, kernel_exponent: exponent };
            cfg.kernel(&[&a, &b]).unwrap().sigma
        } else {
            rng.random_range(0.1..2.0)
        };
        let k = GaussianKernel { sigma, exponent };
        let fast = mmd_squared(&a, &b, &k);
        let slow = brute_mmd2(&a, &b, sigma, exponent);
        assert!((fast - slow).abs() < 1e-12, "trial {t}: {fast} vs {slow}");

        let cfg = MmdConfig { sigma: Bandwidth::Fixed(sigma), kernel_exponent: exponent };
        let d = mmd(&a, &b, &cfg).unwrap();
        assert!((d * d - slow.max(0.0)).abs() < 1e-12);
        assert!(d >= 0.0);
        assert!((d - mmd(&b, &a, &cfg).unwrap()).abs() < 1e-12, "symmetry");
        assert!(mmd(&a, &a, &cfg).unwrap() <= 1e-9, "self distance");
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn median_heuristic_self_distance_is_zero() {
    let mut rng = seeded_rng(3);
    let a = preds(&mut rng, 150, 5, 0.0);
    let d = mmd(&a, &a, &MmdConfig::default()).unwrap();
    assert!(d <= 1e-9);
}

#[test]
fn distance_grows_with_mean_shift() {
    // Common random numbers: every shifted set reuses the same draws.
    let base = preds(&mut seeded_rng(12), 200, 4, 0.0);
    let noise: Vec<Vec<f64>> = {
        let mut rng = seeded_rng(13);
        (0..200).map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect()).collect()
    };
    let shifted = |mu: f64| -> Vec<PredictionVector> {
        noise
            .iter()
            .map(|z| {
                let logits: Vec<f64> = z.iter().enumerate().map(|(k, v)| v + if k == 0 { mu } else { 0.0 }).collect();
                PredictionVector::softmax(&logits).unwrap()
            })
            .collect()
    };
    for exponent in [1u8, 2] {
        let cfg = MmdConfig { sigma: Bandwidth::Fixed(0.5), kernel_exponent: exponent };
        let mut prev = -1.0;
        for mu in [0.0, 0.5, 1.0, 2.0] {
            let b = shifted(mu);
            let d = mmd(&base, &b, &cfg).unwrap();
            let slow = brute_mmd2(&base, &b, 0.5, exponent);
            assert!((d * d - slow.max(0.0)).abs() < 1e-12);
            assert!(d > prev, "exponent {exponent}: mmd at mu={mu} is {d}, previous {prev}");
            prev = d;
        }
    }
}

#[test]
fn incremental_reference_matches_recomputation() {
    let mut rng = seeded_rng(44);
    let a = preds(&mut rng, 60, 3, 0.5);
    let b = preds(&mut rng, 80, 3, 0.0);
    let k = GaussianKernel { sigma: 0.7, exponent: 2 };
    let r = MmdReference::new(&a, &b, k).unwrap();
    let cfg = MmdConfig { sigma: Bandwidth::Fixed(0.7), kernel_exponent: 2 };
    assert!((r.distance() - mmd(&a, &b, &cfg).unwrap()).abs() < 1e-12);
    for y in preds(&mut rng, 10, 3, 1.0) {
        let mut with = a.clone();
        with.push(y.clone());
        assert!((r.distance_with(&y) - mmd(&with, &b, &cfg).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmd_is_order_free_and_nonnegative(seed in any::<u64>(), n in 1usize..30, m in 1usize..30) {
        let mut rng = seeded_rng(seed);
        let a = preds(&mut rng, n, 3, 0.0);
        let b = preds(&mut rng, m, 3, 1.0);
        let cfg = MmdConfig::default();
        let d = mmd(&a, &b, &cfg).unwrap();
        prop_assert!(d >= 0.0);
        let mut ra = a.clone();
        ra.reverse();
        prop_assert!((d - mmd(&ra, &b, &cfg).unwrap()).abs() < 1e-12);
        prop_assert!((d - mmd(&b, &a, &cfg).unwrap()).abs() < 1e-12);
    }
}
