use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::partition::{apply_proportions, partition_indices, PartitionSpec};
use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};

/// How the source dataset is carved up before client partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitFractions {
    /// Share of all rows held out as the swarm's shared test set.
    pub test_fraction: f64,
    /// Share of all rows reserved for the attacker's shadow pool.
    pub attacker_fraction: f64,
    /// Share of the attacker pool used as shadow-train rows.
    pub shadow_fraction: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { test_fraction: 0.2, attacker_fraction: 0.2, shadow_fraction: 0.5 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(self.test_fraction) || !open(self.attacker_fraction) || !open(self.shadow_fraction) {
            return Err(Error::arg("split fractions must lie in (0, 1)"));
        }
        if self.test_fraction + self.attacker_fraction >= 1.0 {
            return Err(Error::arg("test and attacker fractions leave no training rows"));
        }
        Ok(())
    }
}

/// Source-row indices of every part of a [`SwarmSplit`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub client_train: Vec<Vec<usize>>,
    /// Per-client views of the shared test set under the same non-IID draw;
    /// each is a subset of `shared_test`.
    pub client_test: Vec<Vec<usize>>,
    pub shared_test: Vec<usize>,
    pub shadow_train: Vec<usize>,
    pub shadow_test: Vec<usize>,
}

impl SplitIndices {
    /// Every index in the disjoint parts (client trains, shared test, shadow
    /// pool), sorted.
    pub fn covered(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .client_train
            .iter()
            .flatten()
            .chain(&self.shared_test)
            .chain(&self.shadow_train)
            .chain(&self.shadow_test)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }
}

#[derive(Debug, Clone)]
pub struct SwarmSplit {
    pub client_train: Vec<Dataset>,
    pub client_test: Vec<Dataset>,
    pub shared_test: Dataset,
    pub shadow_train: Dataset,
    pub shadow_test: Dataset,
    pub indices: SplitIndices,
}

impl SwarmSplit {
    /// The attacker's whole pool (shadow train followed by shadow test).
    pub fn attacker_pool(&self) -> Dataset {
        Dataset::concat(&[&self.shadow_train, &self.shadow_test]).expect("same source")
    }
}

fn count_of(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round() as usize
}

/// Shuffles the rows, carves off the shared test set and the attacker pool,
/// then partitions what remains among the clients.
pub fn make_swarm_split(
    dataset: &Dataset,
    spec: &PartitionSpec,
    fractions: &SplitFractions,
    seed: u64,
) -> Result<SwarmSplit> {
    fractions.validate()?;
    spec.validate()?;
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(derive_seed(seed, "split-order", 0)));

    let n_test = count_of(fractions.test_fraction, n);
    let n_attack = count_of(fractions.attacker_fraction, n);
    let n_shadow = count_of(fractions.shadow_fraction, n_attack);
    let mut shared_test = order[..n_test].to_vec();
    let attack = &order[n_test..n_test + n_attack];
    let mut shadow_train = attack[..n_shadow].to_vec();
    let mut shadow_test = attack[n_shadow..].to_vec();
    let train_pool = &order[n_test + n_attack..];
    for (name, part) in [("shared test", &shared_test), ("shadow train", &shadow_train), ("shadow test", &shadow_test)]
    {
        if part.is_empty() {
            return Err(Error::arg(format!("{name} split is empty for {n} rows")));
        }
    }
    shared_test.sort_unstable();
    shadow_train.sort_unstable();
    shadow_test.sort_unstable();

    let pool_labels: Vec<usize> = train_pool.iter().map(|&i| dataset.label(i)).collect();
    let plan = partition_indices(&pool_labels, dataset.class_count(), spec)?;
    let client_train: Vec<Vec<usize>> = plan
        .assignments
        .iter()
        .map(|a| {
            let mut v: Vec<usize> = a.iter().map(|&j| train_pool[j]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    if let Some(k) = client_train.iter().position(Vec::is_empty) {
        return Err(Error::arg(format!("client {} received no rows", k + 1)));
    }

    let test_labels: Vec<usize> = shared_test.iter().map(|&i| dataset.label(i)).collect();
    let routed = apply_proportions(&test_labels, &plan.proportions, derive_seed(spec.seed, "client-test", 0))?;
    let client_test: Vec<Vec<usize>> =
        routed.into_iter().map(|a| a.into_iter().map(|j| shared_test[j]).collect()).collect();

    let indices = SplitIndices { client_train, client_test, shared_test, shadow_train, shadow_test };
    Ok(SwarmSplit {
        client_train: indices.client_train.iter().map(|i| dataset.subset(i)).collect(),
        client_test: indices.client_test.iter().map(|i| dataset.subset(i)).collect(),
        shared_test: dataset.subset(&indices.shared_test),
        shadow_train: dataset.subset(&indices.shadow_train),
        shadow_test: dataset.subset(&indices.shadow_test),
        indices,
    })
}
