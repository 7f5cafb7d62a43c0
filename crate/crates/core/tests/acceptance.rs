//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use swarmleak::attacks::{mmd, mmd_squared, Bandwidth, GaussianKernel, MmdConfig};
use swarmleak::data::{partition_indices, PartitionMode, PartitionSpec};
use swarmleak::defenses::{defense_comparison, DefenseSpec};
use swarmleak::harness::{run_scenario, AttackKind, ExperimentReport, ScenarioConfig};
use swarmleak::nn::{loss_and_gradients, ModelParams, TrainConfig};
use swarmleak::rng::{derive_seed, seeded_rng};
use swarmleak::swarm::aggregate;

mod common;
use common::{brute_mmd2, fd_worst, oracle_loss, preds, random_case};

/// Shadow-attack accuracy of the overfit fixture at its first verified run.
const FROZEN_OVERFIT_ACCURACY: f64 = 0.734375;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    ScenarioConfig::from_path(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(cfg: &ScenarioConfig) -> ExperimentReport {
    run_scenario(cfg).unwrap().report
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn gradient_oracle() -> Outcome {
    let ((worst, trials), took) = timed(|| {
        let mut worst: f64 = 0.0;
        for t in 0..20u64 {
            let (model, inputs, labels, l2) = random_case(7000 + t);
            let views: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
            let cfg = TrainConfig { l2_lambda: l2, ..TrainConfig::default() };
            let (_, grads) = loss_and_gradients(&model, &views, &labels, &cfg, &mut seeded_rng(0)).unwrap();
            worst = worst.max(fd_worst(&model, &grads, |m| oracle_loss(m, &inputs, &labels, l2)));
        }
        (worst, 20)
    });
    check(
        worst < 1e-4 && took.as_secs_f64() < 10.0,
        format!("{trials} trials, max relative error {worst:.2e}, {:.2}s", took.as_secs_f64()),
    )
}

fn mmd_oracle() -> Outcome {
    let ((worst, self_max, sym_max), took) = timed(|| {
        let (mut worst, mut self_max, mut sym_max) = (0.0f64, 0.0f64, 0.0f64);
        for t in 0..50u64 {
            let mut rng = seeded_rng(derive_seed(3, "acceptance-mmd", t));
            let classes = rng.random_range(2..=10);
            let (n, m) = (rng.random_range(1..=200), rng.random_range(1..=200));
            let a = preds(&mut rng, n, classes, 0.0);
            let shift = rng.random_range(0.0..2.0);
            let b = preds(&mut rng, m, classes, shift);
            let exponent = 1 + (t % 2) as u8;
            let sigma = rng.random_range(0.1..2.0);
            let fast = mmd_squared(&a, &b, &GaussianKernel { sigma, exponent });
            worst = worst.max((fast - brute_mmd2(&a, &b, sigma, exponent)).abs());
            let cfg = MmdConfig { sigma: Bandwidth::Fixed(sigma), kernel_exponent: exponent };
            self_max = self_max.max(mmd(&a, &a, &cfg).unwrap());
            sym_max = sym_max.max((mmd(&a, &b, &cfg).unwrap() - mmd(&b, &a, &cfg).unwrap()).abs());
        }
        (worst, self_max, sym_max)
    });
    check(
        worst < 1e-12 && self_max <= 1e-9 && sym_max < 1e-12 && took.as_secs_f64() < 10.0,
        format!(
            "50 pairs, |fast-brute| {worst:.1e}, max mmd(a,a) {self_max:.1e}, asymmetry {sym_max:.1e}, {:.2}s",
            took.as_secs_f64()
        ),
    )
}

fn aggregation_exactness() -> Outcome {
    let mut mean_err: f64 = 0.0;
    let mut one_hot_exact = true;
    let mut perm_err: f64 = 0.0;
    for t in 0..20u64 {
        let mut rng = seeded_rng(derive_seed(4, "acceptance-agg", t));
        let count = rng.random_range(2..=6);
        let specs = swarmleak::nn::LayerSpec::mlp(4, &[5], 3);
        let models: Vec<ModelParams> = (0..count).map(|_| ModelParams::init(&specs, &mut rng).unwrap()).collect();
        let refs: Vec<&ModelParams> = models.iter().collect();

        let eq = aggregate(&refs, &vec![1.0 / count as f64; count]).unwrap();
        for (i, v) in eq.iter_params().enumerate() {
            let mean = models.iter().map(|m| *m.iter_params().nth(i).unwrap()).sum::<f64>() / count as f64;
            mean_err = mean_err.max((v - mean).abs());
        }

        let mut hot = vec![0.0; count];
        hot[0] = 1.0;
        let first = aggregate(&refs, &hot).unwrap();
        one_hot_exact &= first.iter_params().zip(models[0].iter_params()).all(|(a, b)| a.to_bits() == b.to_bits());

        let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut rng);
        let a = aggregate(&refs, &w).unwrap();
        let b = aggregate(
            &order.iter().map(|&i| &models[i]).collect::<Vec<_>>(),
            &order.iter().map(|&i| w[i]).collect::<Vec<_>>(),
        )
        .unwrap();
        for (x, y) in a.iter_params().zip(b.iter_params()) {
            perm_err = perm_err.max((x - y).abs());
        }
    }
    check(
        mean_err < 1e-12 && one_hot_exact && perm_err < 1e-12,
        format!(
            "20 cases, mean error {mean_err:.1e}, one-hot bit-exact {one_hot_exact}, permutation error {perm_err:.1e}"
        ),
    )
}

fn partition_soundness() -> Outcome {
    let classes = 10;
    let labels: Vec<usize> = (0..classes).flat_map(|c| std::iter::repeat_n(c, 200)).collect();
    let mut covers = 0;
    for mode in [PartitionMode::Iid, PartitionMode::Dirichlet] {
        for seed in 0..100u64 {
            let spec = match mode {
                PartitionMode::Iid => PartitionSpec::iid(4, seed),
                PartitionMode::Dirichlet => PartitionSpec::dirichlet(4, 0.5, seed),
            };
            let mut all = partition_indices(&labels, classes, &spec).unwrap().assignments.concat();
            all.sort_unstable();
            if all == (0..labels.len()).collect::<Vec<_>>() {
                covers += 1;
            }
        }
    }
    let mut near_iid = 0;
    for seed in 0..100u64 {
        let plan = partition_indices(&labels, classes, &PartitionSpec::dirichlet(4, 1e6, seed)).unwrap();
        let ok = plan.assignments.iter().all(|rows| {
            let mut hist = vec![0usize; classes];
            rows.iter().for_each(|&i| hist[labels[i]] += 1);
            hist.iter().all(|&h| (h as f64 / rows.len() as f64 - 1.0 / classes as f64).abs() <= 0.05)
        });
        near_iid += usize::from(ok);
    }
    check(
        covers == 200 && near_iid >= 95,
        format!("{covers}/200 exact disjoint covers, alpha=1e6 near-IID in {near_iid}/100 trials"),
    )
}

fn leakage_exists() -> Outcome {
    let (r, took) = timed(|| run(&fixture("overfit.json")));
    let acc = r.metrics.accuracy;
    check(
        acc >= 0.60 && r.metrics.baseline == 0.5 && (acc - FROZEN_OVERFIT_ACCURACY).abs() < 1e-12,
        format!(
            "accuracy {acc:.4} (frozen {FROZEN_OVERFIT_ACCURACY}), baseline {}, gap {:.3}, {:.1}s",
            r.metrics.baseline,
            r.model.generalization_gap,
            took.as_secs_f64()
        ),
    )
}

fn balancing_matters() -> Outcome {
    let base = fixture("client_sweep.json");
    let acc = |n: usize, balance: bool| {
        let mut c = base.clone();
        c.partition.client_count = n;
        c.balance_attack_set = balance;
        run(&c).metrics.accuracy
    };
    let (u2, u5, b2, b5) = (acc(2, false), acc(5, false), acc(2, true), acc(5, true));
    check(
        u5 < u2 && (b5 - b2).abs() <= 0.10,
        format!("unbalanced N=2 {u2:.4} > N=5 {u5:.4}; balanced N=2 {b2:.4}, N=5 {b5:.4}"),
    )
}

fn one_to_multi() -> Outcome {
    let r = run(&fixture("one_to_multi.json"));
    let acc = r.metrics.accuracy;
    check(
        acc > 1.0 / 3.0 + 0.05,
        format!("accuracy {acc:.4}, macro_f1 {:.4}, baseline {:.4}", r.metrics.macro_f1, r.metrics.baseline),
    )
}

fn differential() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in [AttackKind::DifferentialV1, AttackKind::DifferentialV2] {
        let mut c = fixture("differential.json");
        c.attack = kind;
        let (r, took) = timed(|| run(&c));
        ok &= r.metrics.accuracy > 0.35 && r.metrics.baseline == 0.25 && took.as_secs() < 300;
        lines.push(format!("{kind:?} {:.4} ({:.0}s)", r.metrics.accuracy, took.as_secs_f64()));
    }
    check(ok, format!("{}, baseline 0.25", lines.join(", ")))
}

fn confidence_vs_entropy() -> Outcome {
    let base = fixture("metric_regime.json");
    let score = |kind: AttackKind| {
        let mut c = base.clone();
        c.attack = kind;
        run(&c).metrics.accuracy
    };
    let (conf, ent) = (score(AttackKind::MetricConfidence), score(AttackKind::MetricEntropy));
    check(
        conf >= ent - 0.05,
        format!(
            "confidence {conf:.4}, entropy {ent:.4} ({} rounds x {} epoch)",
            base.swarm.rounds, base.swarm.local_epochs
        ),
    )
}

fn defense_direction() -> Outcome {
    let base = fixture("overfit.json");
    let mut ok = true;
    let mut parts = Vec::new();
    for rates in [vec![0.25, 0.25], vec![0.25, 0.5], vec![0.5, 0.5]] {
        let spec = DefenseSpec { dropout_rates: rates.clone(), l2_lambda: 0.0 };
        let d = defense_comparison(&base, &spec, AttackKind::ShadowOneToOne).unwrap().delta;
        ok &= d.generalization_gap < 0.0 && d.attack_accuracy <= 0.02;
        parts.push(format!("dropout {rates:?}: d_gap {:+.3} d_acc {:+.3}", d.generalization_gap, d.attack_accuracy));
    }
    let l2 = DefenseSpec { dropout_rates: vec![], l2_lambda: 0.001 };
    let d = defense_comparison(&base, &l2, AttackKind::ShadowOneToOne).unwrap().delta;
    ok &= d.generalization_gap.is_finite() && d.attack_accuracy.is_finite();
    parts.push(format!("l2 0.001: d_gap {:+.3} d_acc {:+.3}", d.generalization_gap, d.attack_accuracy));
    check(ok, parts.join("; "))
}

fn determinism() -> Outcome {
    let mut same = 0;
    let names = ["overfit.json", "metric_regime.json"];
    for name in names {
        let cfg = fixture(name);
        let a = run(&cfg).canonical_json().unwrap();
        let b = run(&cfg).canonical_json().unwrap();
        same += usize::from(a == b);
    }
    let mut diff = fixture("differential.json");
    diff.swarm.rounds = 3;
    diff.attack = AttackKind::DifferentialV2;
    let a = run_scenario(&diff).unwrap();
    let b = run_scenario(&diff).unwrap();
    let diff_same = a.report.canonical_json().unwrap() == b.report.canonical_json().unwrap() && a.traces == b.traces;
    same += usize::from(diff_same);
    check(same == names.len() + 1, format!("{same}/{} scenarios byte-identical across reruns", names.len() + 1))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("gradient oracle", gradient_oracle),
        ("mmd oracle", mmd_oracle),
        ("aggregation exactness", aggregation_exactness),
        ("partition soundness", partition_soundness),
        ("leakage exists", leakage_exists),
        ("balancing matters", balancing_matters),
        ("one-to-multi beats baseline", one_to_multi),
        ("differential beats baseline", differential),
        ("confidence >= entropy", confidence_vs_entropy),
        ("defense direction", defense_direction),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
