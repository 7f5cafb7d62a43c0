//! Round-based decentralized training: every round each client trains on
//! its own data starting from the broadcast model, a temporary aggregator
//! is elected, it averages the local models with the configured weights,
//! and the result is broadcast back to everyone.
//!
//! The transport is a perfect channel. Observers get read-only access to the
//! round logs, which is all a malicious participant sees beyond its own
//! state.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{accuracy, train_local, ModelParams, TrainConfig};
use crate::rng::{derive_seed, seeded_rng, SimRng};

pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ClientState {
    /// 1-based client id.
    pub id: usize,
    pub train_data: Dataset,
    pub model: ModelParams,
    pub weight: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Election {
    #[default]
    RoundRobin,
    SeededRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub election: Election,
    /// Template for local training; `epochs` and `seed` are overridden per
    /// client and round.
    pub train_cfg: TrainConfig,
    /// Aggregation weights in client order. `None` uses each client's own
    /// `weight`.
    pub weights: Option<Vec<f64>>,
    /// Seeds the protocol generator used for random elections.
    pub seed: u64,
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::arg("rounds must be at least 1"));
        }
        self.train_cfg.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub aggregator_id: usize,
    pub global_model_snapshot: ModelParams,
    /// Accuracy of the broadcast model on each client's training data.
    pub per_client_train_acc: Vec<f64>,
    pub shared_test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct SwarmOutcome {
    pub global: ModelParams,
    pub logs: Vec<RoundLog>,
}

/// Picks the 1-based id of this round's temporary aggregator.
pub fn elect_aggregator(round: usize, client_count: usize, election: Election, rng: &mut SimRng) -> usize {
    match election {
        Election::RoundRobin => (round.saturating_sub(1) % client_count) + 1,
        Election::SeededRandom => rng.random_range(1..=client_count),
    }
}

fn check_weights(weights: &[f64], count: usize) -> Result<()> {
    if weights.len() != count {
        return Err(Error::arg(format!("{} weights for {count} models", weights.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::arg("aggregation weights must be nonnegative reals"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::arg(format!("aggregation weights sum to {sum}")));
    }
    Ok(())
}

/// Weighted parameter average. Models with zero weight contribute nothing,
/// so a one-hot weight vector returns that model bit for bit.
pub fn aggregate(models: &[&ModelParams], weights: &[f64]) -> Result<ModelParams> {
    let first = models.first().ok_or_else(|| Error::arg("no models to aggregate"))?;
    check_weights(weights, models.len())?;
    for m in models {
        if !first.same_shape(m) {
            return Err(Error::shape("models differ in architecture"));
        }
    }
    let mut out = ModelParams::zeros(&first.specs())?;
    let mut started = false;
    for (m, &w) in models.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (acc, &p) in out.iter_params_mut().zip(m.iter_params()) {
            *acc = if started { *acc + w * p } else { w * p };
        }
        started = true;
    }
    Ok(out)
}

pub fn run_swarm(clients: &[ClientState], cfg: &SwarmConfig, shared_test: &Dataset) -> Result<SwarmOutcome> {
    run_swarm_observed(clients, cfg, shared_test, |_| {})
}

/// Runs the protocol, handing each round's log to `observer` after the
/// broadcast.
pub fn run_swarm_observed(
    clients: &[ClientState],
    cfg: &SwarmConfig,
    shared_test: &Dataset,
    mut observer: impl FnMut(&RoundLog),
) -> Result<SwarmOutcome> {
    cfg.validate()?;
    if clients.len() < 2 {
        return Err(Error::arg("a swarm needs at least 2 clients"));
    }
    let first = &clients[0].model;
    if clients.iter().any(|c| !first.same_shape(&c.model)) {
        return Err(Error::shape("client models differ in architecture"));
    }
    let weights: Vec<f64> = match &cfg.weights {
        Some(w) => w.clone(),
        None => clients.iter().map(|c| c.weight).collect(),
    };
    check_weights(&weights, clients.len())?;

    let mut protocol_rng = seeded_rng(cfg.seed);
    let mut locals: Vec<ModelParams> = clients.iter().map(|c| c.model.clone()).collect();
    let mut logs = Vec::with_capacity(cfg.rounds);
    let mut global = None;
    for round in 1..=cfg.rounds {
        // Local steps are independent; per-client seeds make the result
        // independent of scheduling.
        locals = clients
            .par_iter()
            .zip(locals.par_iter())
            .map(|(client, start)| {
                let tc = TrainConfig {
                    epochs: cfg.local_epochs,
                    seed: derive_seed(client.seed, "round", round as u64),
                    ..cfg.train_cfg
                };
                train_local(start, &client.train_data, &tc)
            })
            .collect::<Result<_>>()?;

        let aggregator_id = elect_aggregator(round, clients.len(), cfg.election, &mut protocol_rng);
        let refs: Vec<&ModelParams> = locals.iter().collect();
        let next = aggregate(&refs, &weights)?;

        let per_client_train_acc =
            clients.iter().map(|c| accuracy(&next, &c.train_data)).collect::<Result<Vec<_>>>()?;
        let log = RoundLog {
            round,
            aggregator_id,
            global_model_snapshot: next.clone(),
            per_client_train_acc,
            shared_test_acc: accuracy(&next, shared_test)?,
        };
        observer(&log);
        logs.push(log);

        locals.iter_mut().for_each(|m| m.clone_from(&next));
        global = Some(next);
    }
    Ok(SwarmOutcome { global: global.expect("rounds >= 1"), logs })
}
