use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use swarmleak::data::{generate_synthetic, make_swarm_split, partition, Dataset, PartitionSpec, SplitFractions};
use swarmleak::defenses::DefenseSpec;
use swarmleak::harness::{build_clients, client_architecture, load_dataset, partition_spec, ScenarioConfig};
use swarmleak::nn::{accuracy, train_local, LayerSpec, ModelParams, TrainConfig};
use swarmleak::rng::{derive_seed, seeded_rng, SimRng};
use swarmleak::swarm::{
    aggregate, elect_aggregator, run_swarm, run_swarm_observed, ClientState, Election, RoundLog, SwarmConfig,
};

fn random_models(rng: &mut SimRng, count: usize) -> Vec<ModelParams> {
    let specs = LayerSpec::mlp(3, &[4], 2);
    (0..count).map(|_| ModelParams::init(&specs, rng).unwrap()).collect()
}

fn random_weights(rng: &mut SimRng, count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w / sum).collect()
}

fn max_abs_diff(a: &ModelParams, b: &ModelParams) -> f64 {
    a.iter_params().zip(b.iter_params()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn permuting_models_with_weights_leaves_average_unchanged() {
    for t in 0..20u64 {
        let mut rng = seeded_rng(derive_seed(7, "perm", t));
        let count = rng.random_range(2..=6);
        let models = random_models(&mut rng, count);
        let weights = random_weights(&mut rng, count);
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut rng);
        let refs: Vec<&ModelParams> = models.iter().collect();
        let permuted: Vec<&ModelParams> = order.iter().map(|&i| &models[i]).collect();
        let pw: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
        let a = aggregate(&refs, &weights).unwrap();
        let b = aggregate(&permuted, &pw).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-12, "case {t}");
    }
}

proptest! {
    #[test]
    fn equal_weights_give_the_mean(seed in any::<u64>(), count in 2usize..8) {
        let mut rng = seeded_rng(seed);
        let models = random_models(&mut rng, count);
        let refs: Vec<&ModelParams> = models.iter().collect();
        let out = aggregate(&refs, &vec![1.0 / count as f64; count]).unwrap();
        for (i, v) in out.iter_params().enumerate() {
            let mean: f64 = models.iter().map(|m| *m.iter_params().nth(i).unwrap()).sum::<f64>() / count as f64;
            prop_assert!((v - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_weights_select_bitwise(seed in any::<u64>(), count in 2usize..8, pick in 0usize..8) {
        let pick = pick % count;
        let mut rng = seeded_rng(seed);
        let models = random_models(&mut rng, count);
        let refs: Vec<&ModelParams> = models.iter().collect();
        let mut w = vec![0.0; count];
        w[pick] = 1.0;
        let out = aggregate(&refs, &w).unwrap();
        prop_assert!(out.iter_params().zip(models[pick].iter_params()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn seeded_random_election_is_near_uniform() {
    let mut rng = seeded_rng(derive_seed(5, "protocol", 0));
    let mut counts = [0usize; 3];
    for round in 1..=3000 {
        let id = elect_aggregator(round, 3, Election::SeededRandom, &mut rng);
        assert!((1..=3).contains(&id));
        counts[id - 1] += 1;
    }
    for c in counts {
        assert!((800..=1200).contains(&c), "counts {counts:?}");
    }
}

fn blob_clients(n: usize, seed: u64) -> (Vec<ClientState>, Dataset) {
    blob_clients_with(n, seed, 0.3)
}

fn blob_clients_with(n: usize, seed: u64, spread: f64) -> (Vec<ClientState>, Dataset) {
    let data = generate_synthetic(5, 120, 10, spread, seed).unwrap();
    let spec = PartitionSpec::iid(n, derive_seed(seed, "partition", 0));
    let fractions = SplitFractions { test_fraction: 0.25, attacker_fraction: 0.1, shadow_fraction: 0.5 };
    let split = make_swarm_split(&data, &spec, &fractions, seed).unwrap();
    let init = ModelParams::init(&LayerSpec::mlp(10, &[32], 5), &mut seeded_rng(seed)).unwrap();
    let clients = split
        .client_train
        .iter()
        .enumerate()
        .map(|(i, d)| ClientState {
            id: i + 1,
            train_data: d.clone(),
            model: init.clone(),
            weight: 1.0 / n as f64,
            seed: derive_seed(seed, "client", i as u64),
        })
        .collect();
    (clients, split.shared_test)
}

fn swarm_cfg(rounds: usize, local_epochs: usize) -> SwarmConfig {
    SwarmConfig {
        rounds,
        local_epochs,
        election: Election::SeededRandom,
        train_cfg: TrainConfig { learning_rate: 0.05, batch_size: 16, ..TrainConfig::default() },
        weights: None,
        seed: 99,
    }
}

#[test]
fn three_client_blobs_reach_the_frozen_accuracy() {
    let (clients, test) = blob_clients(3, 21);
    let out = run_swarm(&clients, &swarm_cfg(20, 1), &test).unwrap();
    let acc = accuracy(&out.global, &test).unwrap();
    assert!(acc >= 0.85, "shared-test accuracy {acc}");
    assert_eq!(out.logs.len(), 20);
    assert!(out.logs.iter().all(|l| (1..=3).contains(&l.aggregator_id)));
    assert_eq!(out.logs.last().unwrap().shared_test_acc, acc);
}

#[test]
fn observing_rounds_changes_nothing() {
    let (clients, test) = blob_clients(3, 4);
    let cfg = swarm_cfg(6, 2);
    let plain = run_swarm(&clients, &cfg, &test).unwrap();
    let mut seen: Vec<RoundLog> = Vec::new();
    let watched = run_swarm_observed(&clients, &cfg, &test, |log| seen.push(log.clone())).unwrap();
    assert_eq!(plain.global, watched.global);
    assert_eq!(plain.logs, watched.logs);
    assert_eq!(seen, watched.logs);
    let again = run_swarm(&clients, &cfg, &test).unwrap();
    assert_eq!(plain.logs, again.logs);
}

#[test]
fn zero_local_epochs_average_the_initial_models() {
    let (mut clients, test) = blob_clients(2, 8);
    let mut rng = seeded_rng(1);
    for c in &mut clients {
        c.model = ModelParams::init(&LayerSpec::mlp(10, &[32], 5), &mut rng).unwrap();
    }
    clients[0].weight = 0.3;
    clients[1].weight = 0.7;
    let out = run_swarm(&clients, &swarm_cfg(1, 0), &test).unwrap();
    let expect = aggregate(&[&clients[0].model, &clients[1].model], &[0.3, 0.7]).unwrap();
    assert_eq!(out.global, expect);
}

#[test]
fn identical_clients_aggregate_to_their_shared_local_model() {
    let (clients, test) = blob_clients(2, 9);
    let twin = ClientState { id: 2, ..clients[0].clone() };
    let pair = vec![clients[0].clone(), twin];
    let cfg = swarm_cfg(1, 3);
    let out = run_swarm(&pair, &cfg, &test).unwrap();
    let local = train_local(
        &pair[0].model,
        &pair[0].train_data,
        &TrainConfig { epochs: 3, seed: derive_seed(pair[0].seed, "round", 1), ..cfg.train_cfg },
    )
    .unwrap();
    assert_eq!(out.global, local);
    assert_eq!(out.logs[0].per_client_train_acc[0], out.logs[0].per_client_train_acc[1]);
}

const SPREAD: f64 = 0.6;

#[test]
fn swarm_beats_isolated_training() {
    // Noisier blobs, where a third of the data is not enough on its own.
    let (clients, test) = blob_clients_with(3, 21, SPREAD);
    let cfg = swarm_cfg(20, 1);
    let global = run_swarm(&clients, &cfg, &test).unwrap().global;
    let swarm_acc = accuracy(&global, &test).unwrap();
    for c in &clients {
        let alone =
            train_local(&c.model, &c.train_data, &TrainConfig { epochs: 20, seed: c.seed, ..cfg.train_cfg }).unwrap();
        let acc = accuracy(&alone, &test).unwrap();
        assert!(swarm_acc > acc, "client {} alone {acc} vs swarm {swarm_acc}", c.id);
    }
}

#[test]
fn partitions_feed_every_client() {
    let data = generate_synthetic(4, 30, 3, 0.5, 1).unwrap();
    let parts = partition(&data, &PartitionSpec::dirichlet(4, 0.5, 3)).unwrap();
    assert!(parts.iter().all(|p| !p.is_empty()));
}

#[test]
fn defended_and_plain_arms_start_from_the_same_state() {
    let cfg = ScenarioConfig::from_json(
        r#"{"seed": 5, "dataset": {"synthetic": {"class_count": 3, "per_class": 40, "dim": 4, "spread": 0.5}},
        "partition": {"mode": "iid", "client_count": 3}, "model": {"hidden": [16, 8]}, "attack": "shadow_one_to_one"}"#,
    )
    .unwrap();
    let mut guarded = cfg.clone();
    guarded.defense = DefenseSpec { dropout_rates: vec![0.5, 0.25], l2_lambda: 1e-3 };
    let data = load_dataset(&cfg).unwrap();
    let split = make_swarm_split(&data, &partition_spec(&cfg), &cfg.split, derive_seed(cfg.seed, "split", 0)).unwrap();
    let (plain_layers, _) = client_architecture(&cfg, &data).unwrap();
    let (guard_layers, guard_train) = client_architecture(&guarded, &data).unwrap();
    assert_eq!(guard_layers[0].dropout_rate, 0.5);
    assert_eq!(guard_train.l2_lambda, 1e-3);
    let a = build_clients(&cfg, &split, &plain_layers).unwrap();
    let b = build_clients(&guarded, &split, &guard_layers).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.train_data, y.train_data);
        assert!(x.model.iter_params().eq(y.model.iter_params()));
    }
}
