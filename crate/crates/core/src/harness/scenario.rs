use std::time::Instant;

use rand::seq::SliceRandom;

use super::config::{AttackKind, DatasetSource, ScenarioConfig};
use super::report::{
    AttackDetails, AttackerMetrics, ExperimentReport, ModelSummary, RoundSummary, VerdictRow, ARTIFACT_VERSION,
    SCHEMA_VERSION,
};
use crate::attacks::{
    differential_attack_v1, differential_attack_v2_with, evaluate_attack, metric_attack, one_to_multi_attack,
    shadow_attack_infer, shadow_attack_train, AttackVerdict, DifferentialTrace, MemberReference, Membership, Metric,
};
use crate::data::{generate_synthetic, load_csv, load_idx, make_swarm_split, Dataset, PartitionSpec, SwarmSplit};
use crate::defenses::apply_defense;
use crate::error::{Error, Result};
use crate::nn::{accuracy, predict, LayerSpec, ModelParams, TrainConfig};
use crate::rng::{derive_seed, seeded_rng, stream};
use crate::swarm::{run_swarm, ClientState, RoundLog, SwarmConfig};

/// Everything a run produces. `report` is the summary; the rest feeds the
/// per-target and per-round output files.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: ExperimentReport,
    pub verdicts: Vec<VerdictRow>,
    pub round_logs: Vec<RoundLog>,
    pub traces: Vec<DifferentialTrace>,
}

pub fn load_dataset(cfg: &ScenarioConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Synthetic { class_count, per_class, dim, spread } => {
            generate_synthetic(*class_count, *per_class, *dim, *spread, derive_seed(cfg.seed, stream::DATA, 0))
        }
        DatasetSource::Idx { images, labels } => load_idx(images, labels),
        DatasetSource::Csv { path, label_column } => load_csv(path, label_column),
    }
}

pub fn partition_spec(cfg: &ScenarioConfig) -> PartitionSpec {
    PartitionSpec {
        mode: cfg.partition.mode,
        alpha: cfg.partition.alpha,
        client_count: cfg.partition.client_count,
        seed: derive_seed(cfg.seed, stream::PARTITION, 0),
        weights: cfg.partition.weights.clone(),
    }
}

/// Per-client layer specs and training template after the defense.
pub fn client_architecture(cfg: &ScenarioConfig, data: &Dataset) -> Result<(Vec<LayerSpec>, TrainConfig)> {
    let base = LayerSpec::mlp(data.dim(), &cfg.model.hidden, data.class_count());
    let train = TrainConfig {
        learning_rate: cfg.swarm.learning_rate,
        l2_lambda: cfg.swarm.l2_lambda,
        epochs: cfg.swarm.local_epochs,
        batch_size: cfg.swarm.batch_size,
        seed: 0,
    };
    let (layers, mut train) = apply_defense(&base, &train, &cfg.defense)?;
    // A defense without weight decay keeps the configured one.
    if cfg.defense.l2_lambda == 0.0 {
        train.l2_lambda = cfg.swarm.l2_lambda;
    }
    Ok((layers, train))
}

/// Builds the clients. All start from one shared initialisation so that the
/// first aggregation averages comparable networks.
pub fn build_clients(cfg: &ScenarioConfig, split: &SwarmSplit, layers: &[LayerSpec]) -> Result<Vec<ClientState>> {
    let n = cfg.client_count();
    let init = ModelParams::init(layers, &mut seeded_rng(derive_seed(cfg.seed, stream::CLIENT_INIT, 0)))?;
    let weights = cfg.swarm.weights.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
    Ok(split
        .client_train
        .iter()
        .enumerate()
        .map(|(i, data)| ClientState {
            id: i + 1,
            train_data: data.clone(),
            model: init.clone(),
            weight: weights[i],
            seed: derive_seed(cfg.seed, stream::CLIENT_TRAIN, (i + 1) as u64),
        })
        .collect())
}

/// Evaluation targets: one block of rows per attack class, every block cut
/// to the same size so that blind guessing scores exactly 1/classes.
struct TargetSet {
    data: Dataset,
    truth: Vec<Membership>,
}

fn sample_rows(data: &Dataset, count: usize, seed: u64) -> Dataset {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut seeded_rng(seed));
    idx.truncate(count);
    idx.sort_unstable();
    data.subset(&idx)
}

fn build_targets(blocks: &[(Membership, &Dataset)], cap: usize, seed: u64) -> Result<TargetSet> {
    let per = blocks.iter().map(|(_, d)| d.len()).min().unwrap_or(0).min(cap);
    if per == 0 {
        return Err(Error::arg("an attack target class has no rows"));
    }
    let mut parts = Vec::with_capacity(blocks.len());
    let mut truth = Vec::new();
    for (i, (class, data)) in blocks.iter().enumerate() {
        parts.push(sample_rows(data, per, derive_seed(seed, "targets", i as u64)));
        truth.extend(std::iter::repeat_n(*class, per));
    }
    let refs: Vec<&Dataset> = parts.iter().collect();
    Ok(TargetSet { data: Dataset::concat(&refs)?, truth })
}

/// Splits a victim's training rows into a reference half (known to the
/// auditor) and a held-back half used as member targets.
fn halve(data: &Dataset, seed: u64) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let mid = idx.len() / 2;
    let (mut a, mut b) = (idx[..mid].to_vec(), idx[mid..].to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (data.subset(&a), data.subset(&b))
}

struct AttackRun {
    classes: Vec<Membership>,
    truth: Vec<Membership>,
    verdicts: Vec<AttackVerdict>,
    /// Attacker id per verdict.
    attackers: Vec<usize>,
    details: AttackDetails,
    traces: Vec<DifferentialTrace>,
}

fn client(clients: &[ClientState], id: usize) -> &ClientState {
    &clients[id - 1]
}

fn run_attack(
    cfg: &ScenarioConfig,
    clients: &[ClientState],
    split: &SwarmSplit,
    query: &ModelParams,
) -> Result<AttackRun> {
    let seed = derive_seed(cfg.seed, stream::ATTACK, 0);
    let cap = cfg.max_targets_per_class;
    let mut details = AttackDetails::default();
    match cfg.attack {
        AttackKind::ShadowOneToOne | AttackKind::ShadowMultiToOne => {
            let victim = cfg.victims()[0];
            let attackers = if cfg.attack == AttackKind::ShadowOneToOne {
                vec![cfg.attacker()]
            } else {
                cfg.multi_to_one_attackers()
            };
            let targets = build_targets(
                &[
                    (Membership::Member(victim), &client(clients, victim).train_data),
                    (Membership::Nonmember, &split.shared_test),
                ],
                cap,
                seed,
            )?;
            let mut run = AttackRun {
                classes: vec![Membership::Nonmember, Membership::Member(victim)],
                truth: Vec::new(),
                verdicts: Vec::new(),
                attackers: Vec::new(),
                details,
                traces: Vec::new(),
            };
            for &a in &attackers {
                let attack = shadow_attack_train(
                    client(clients, a),
                    query,
                    &split.shadow_train,
                    &split.shadow_test,
                    &cfg.attack_model,
                    cfg.balance_attack_set,
                    derive_seed(seed, "shadow", a as u64),
                )?;
                let verdicts = shadow_attack_infer(&attack, query, &targets.data, victim)?;
                run.details.attack_train_accuracy.push(attack.train_accuracy);
                if let Some(h) = attack.holdout_accuracy {
                    run.details.attack_holdout_accuracy.push(h);
                }
                run.details.attack_train_class_counts.push(attack.train_class_counts.clone());
                run.truth.extend_from_slice(&targets.truth);
                run.attackers.extend(std::iter::repeat_n(a, verdicts.len()));
                run.verdicts.extend(verdicts);
            }
            Ok(run)
        }
        AttackKind::MetricConfidence | AttackKind::MetricEntropy => {
            let metric = if cfg.attack == AttackKind::MetricConfidence { Metric::Confidence } else { Metric::Entropy };
            let attacker = cfg.attacker();
            let victim = cfg.victims()[0];
            let values =
                |d: &Dataset| -> Result<Vec<f64>> { Ok(predict(query, d)?.iter().map(|p| metric.value(p)).collect()) };
            let members = values(&client(clients, attacker).train_data)?;
            let nonmembers = values(&split.shadow_train)?;
            let targets = build_targets(
                &[
                    (Membership::Member(victim), &client(clients, victim).train_data),
                    (Membership::Nonmember, &split.shared_test),
                ],
                cap,
                seed,
            )?;
            let preds = predict(query, &targets.data)?;
            let (threshold, verdicts) = metric_attack(metric, &members, &nonmembers, &preds, victim)?;
            details.threshold = Some(threshold);
            Ok(AttackRun {
                classes: vec![Membership::Nonmember, Membership::Member(victim)],
                attackers: vec![attacker; verdicts.len()],
                truth: targets.truth,
                verdicts,
                details,
                traces: Vec::new(),
            })
        }
        AttackKind::ShadowOneToMulti | AttackKind::DifferentialV1 | AttackKind::DifferentialV2 => {
            let attacker = cfg.attacker();
            let victims = cfg.victims();
            let halves: Vec<(Dataset, Dataset)> = victims
                .iter()
                .map(|&v| halve(&client(clients, v).train_data, derive_seed(seed, "reference", v as u64)))
                .collect();
            let mut blocks: Vec<(Membership, &Dataset)> = vec![(Membership::Nonmember, &split.shared_test)];
            blocks.extend(victims.iter().zip(&halves).map(|(&v, (_, held))| (Membership::Member(v), held)));
            let targets = build_targets(&blocks, cap, seed)?;
            let mut classes = vec![Membership::Nonmember];
            classes.extend(victims.iter().map(|&v| Membership::Member(v)));

            let (verdicts, traces) = if cfg.attack == AttackKind::ShadowOneToMulti {
                let shadow: Vec<(usize, &Dataset)> =
                    victims.iter().zip(&halves).map(|(&v, (known, _))| (v, known)).collect();
                let out =
                    one_to_multi_attack(query, &shadow, &split.shadow_train, &targets.data, &cfg.attack_model, seed)?;
                details.attack_train_accuracy.push(out.train_accuracy);
                (out.verdicts, Vec::new())
            } else {
                let member_refs = victims
                    .iter()
                    .zip(&halves)
                    .map(|(&v, (known, _))| Ok(MemberReference { client_id: v, preds: predict(query, known)? }))
                    .collect::<Result<Vec<_>>>()?;
                let nonmember_ref = predict(query, &split.shadow_train)?;
                let target_preds = predict(query, &targets.data)?;
                let out = if cfg.attack == AttackKind::DifferentialV1 {
                    differential_attack_v1(&target_preds, &member_refs, &nonmember_ref, &cfg.mmd)?
                } else {
                    differential_attack_v2_with(
                        &target_preds,
                        &member_refs,
                        &nonmember_ref,
                        &cfg.mmd,
                        cfg.differential_v2_rule,
                    )?
                };
                details.sigma = Some(out.kernel.sigma);
                details.kernel_exponent = Some(out.kernel.exponent);
                (out.verdicts, out.traces)
            };
            Ok(AttackRun {
                classes,
                attackers: vec![attacker; verdicts.len()],
                truth: targets.truth,
                verdicts,
                details,
                traces,
            })
        }
    }
}

/// Deterministic end to end: split, swarm training, attack, evaluation.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    let split = make_swarm_split(&dataset, &partition_spec(cfg), &cfg.split, derive_seed(cfg.seed, stream::SPLIT, 0))?;
    let (layers, train_cfg) = client_architecture(cfg, &dataset)?;
    let clients = build_clients(cfg, &split, &layers)?;
    let swarm_cfg = SwarmConfig {
        rounds: cfg.swarm.rounds,
        local_epochs: cfg.swarm.local_epochs,
        election: cfg.swarm.election,
        train_cfg,
        weights: None,
        seed: derive_seed(cfg.seed, stream::PROTOCOL, 0),
    };
    let outcome = run_swarm(&clients, &swarm_cfg, &split.shared_test)?;
    let query = match cfg.query_round {
        Some(r) => &outcome.logs[r - 1].global_model_snapshot,
        None => &outcome.global,
    };

    let run = run_attack(cfg, &clients, &split, query)?;
    let metrics = evaluate_attack(&run.verdicts, &run.truth, &run.classes)?;
    let mut attacker_ids = run.attackers.clone();
    attacker_ids.dedup();
    let per_attacker = if attacker_ids.len() > 1 {
        attacker_ids
            .iter()
            .map(|&a| {
                let pick: Vec<usize> = (0..run.verdicts.len()).filter(|&i| run.attackers[i] == a).collect();
                let v: Vec<AttackVerdict> = pick.iter().map(|&i| run.verdicts[i]).collect();
                let t: Vec<Membership> = pick.iter().map(|&i| run.truth[i]).collect();
                Ok(AttackerMetrics { attacker_id: a, metrics: evaluate_attack(&v, &t, &run.classes)? })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let pooled: Vec<&Dataset> = split.client_train.iter().collect();
    let train_accuracy = accuracy(query, &Dataset::concat(&pooled)?)?;
    let test_accuracy = accuracy(query, &split.shared_test)?;
    let model = ModelSummary {
        train_accuracy,
        test_accuracy,
        generalization_gap: train_accuracy - test_accuracy,
        per_client_train_accuracy: split.client_train.iter().map(|d| accuracy(query, d)).collect::<Result<_>>()?,
        per_client_test_accuracy: split
            .client_test
            .iter()
            .map(|d| if d.is_empty() { Ok(0.0) } else { accuracy(query, d) })
            .collect::<Result<_>>()?,
        client_train_sizes: split.client_train.iter().map(Dataset::len).collect(),
    };
    let mut details = run.details;
    details.target_count = run.verdicts.len();

    let verdicts = run
        .verdicts
        .iter()
        .zip(&run.truth)
        .zip(&run.attackers)
        .map(|((v, t), a)| VerdictRow {
            target_index: v.target_index,
            attacker_id: *a,
            truth: *t,
            predicted: v.predicted,
            score: v.score,
        })
        .collect();
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION.to_string(),
        seed: cfg.seed,
        scenario: cfg.clone(),
        attack: cfg.attack,
        metrics,
        per_attacker,
        model,
        details,
        rounds: outcome.logs.iter().map(RoundSummary::from).collect(),
        round_log_file: super::report::ROUNDS_FILE.to_string(),
        wall_clock_ms: started.elapsed().as_millis() as u64,
    };
    Ok(ScenarioOutcome { report, verdicts, round_logs: outcome.logs, traces: run.traces })
}
