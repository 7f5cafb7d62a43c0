//! IID and Dirichlet non-IID client partitioning.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng, SimRng};

pub const DEFAULT_ALPHA: f64 = 0.5;
const MAX_REPAIR_RETRIES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Iid,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    /// Dirichlet concentration; ignored in IID mode.
    pub alpha: f64,
    pub client_count: usize,
    pub seed: u64,
    /// Optional relative client shares, summing to 1.
    pub weights: Option<Vec<f64>>,
}

impl PartitionSpec {
    pub fn iid(client_count: usize, seed: u64) -> Self {
        PartitionSpec { mode: PartitionMode::Iid, alpha: DEFAULT_ALPHA, client_count, seed, weights: None }
    }

    pub fn dirichlet(client_count: usize, alpha: f64, seed: u64) -> Self {
        PartitionSpec { mode: PartitionMode::Dirichlet, alpha, client_count, seed, weights: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.client_count < 2 {
            return Err(Error::arg("a swarm needs at least 2 clients"));
        }
        if self.mode == PartitionMode::Dirichlet && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::arg("dirichlet alpha must be positive"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.client_count {
                return Err(Error::arg(format!("{} partition weights for {} clients", w.len(), self.client_count)));
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::arg("partition weights must be positive"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::arg(format!("partition weights sum to {sum}")));
            }
        }
        Ok(())
    }

    fn shares(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0 / self.client_count as f64; self.client_count])
    }
}

/// Result of partitioning: per-client row indices (ascending) and the
/// per-class client proportions that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub assignments: Vec<Vec<usize>>,
    /// `proportions[c][k]`: probability that a sample of class `c` goes to
    /// client `k`.
    pub proportions: Vec<Vec<f64>>,
}

fn class_buckets(labels: &[usize], class_count: usize) -> Vec<Vec<usize>> {
    let mut buckets = vec![Vec::new(); class_count];
    for (i, &y) in labels.iter().enumerate() {
        buckets[y].push(i);
    }
    buckets
}

fn sample_dirichlet(alpha: f64, k: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::arg(format!("gamma({alpha}): {e}")))?;
    // Very small alphas can underflow every component to zero; redraw.
    for _ in 0..1000 {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return Ok(draws.into_iter().map(|g| g / sum).collect());
        }
    }
    Err(Error::Partition(format!("dirichlet draw with alpha={alpha} kept underflowing")))
}

fn categorical(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left a sliver above the last cumulative value.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Assigns each sample to a client by a categorical draw from its class's
/// proportion row. Used both for training partitions and to route a held-out
/// test pool through the same non-IID draw.
pub fn apply_proportions(labels: &[usize], proportions: &[Vec<f64>], seed: u64) -> Result<Vec<Vec<usize>>> {
    let k = proportions.first().map_or(0, Vec::len);
    let mut rng = seeded_rng(seed);
    let mut out = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        let row = proportions.get(y).ok_or_else(|| Error::arg(format!("no proportions for class {y}")))?;
        out[categorical(row, &mut rng)].push(i);
    }
    Ok(out)
}

fn iid_plan(labels: &[usize], class_count: usize, spec: &PartitionSpec) -> Result<PartitionPlan> {
    let k = spec.client_count;
    let buckets = class_buckets(labels, class_count);
    if let Some((c, b)) = buckets.iter().enumerate().find(|(_, b)| !b.is_empty() && b.len() < k) {
        return Err(Error::Partition(format!(
            "class {c} has {} samples, iid partition over {k} clients needs at least {k}",
            b.len()
        )));
    }
    let shares = spec.shares();
    let mut rng = seeded_rng(spec.seed);
    let mut assignments = vec![Vec::new(); k];
    let mut next = 0usize;
    for mut bucket in buckets {
        bucket.shuffle(&mut rng);
        if spec.weights.is_none() {
            // Round-robin continuing across classes keeps totals within one.
            for i in bucket {
                assignments[next].push(i);
                next = (next + 1) % k;
            }
        } else {
            let quotas = largest_remainder(bucket.len(), &shares);
            let mut it = bucket.into_iter();
            for (client, q) in quotas.into_iter().enumerate() {
                assignments[client].extend(it.by_ref().take(q));
            }
        }
    }
    for a in &mut assignments {
        a.sort_unstable();
    }
    Ok(PartitionPlan { assignments, proportions: vec![shares; class_count] })
}

fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        quotas[i] += 1;
        left -= 1;
    }
    quotas
}

fn dirichlet_draw(buckets: &[Vec<usize>], spec: &PartitionSpec, seed: u64) -> Result<PartitionPlan> {
    let k = spec.client_count;
    let shares = spec.shares();
    let mut rng = seeded_rng(seed);
    let mut assignments = vec![Vec::new(); k];
    let mut proportions = Vec::with_capacity(buckets.len());
    for bucket in buckets {
        let mut p = sample_dirichlet(spec.alpha, k, &mut rng)?;
        if spec.weights.is_some() {
            for (pk, w) in p.iter_mut().zip(&shares) {
                *pk *= w;
            }
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|pk| *pk /= s);
        }
        for &i in bucket {
            assignments[categorical(&p, &mut rng)].push(i);
        }
        proportions.push(p);
    }
    Ok(PartitionPlan { assignments, proportions })
}

fn dirichlet_plan(labels: &[usize], class_count: usize, spec: &PartitionSpec) -> Result<PartitionPlan> {
    let k = spec.client_count;
    if labels.len() < k {
        return Err(Error::Partition(format!("{} samples cannot cover {k} clients", labels.len())));
    }
    let buckets = class_buckets(labels, class_count);
    let mut plan = dirichlet_draw(&buckets, spec, spec.seed)?;
    let mut retry = 0;
    while plan.assignments.iter().any(Vec::is_empty) && retry < MAX_REPAIR_RETRIES {
        retry += 1;
        plan = dirichlet_draw(&buckets, spec, derive_seed(spec.seed, "dirichlet-retry", retry))?;
    }
    // Still degenerate: feed each empty client one sample from the largest.
    while let Some(empty) = plan.assignments.iter().position(Vec::is_empty) {
        let largest = (0..k).max_by_key(|&j| (plan.assignments[j].len(), std::cmp::Reverse(j))).expect("k >= 2");
        if plan.assignments[largest].len() < 2 {
            return Err(Error::Partition("cannot repair empty client".into()));
        }
        let moved = plan.assignments[largest].pop().expect("nonempty");
        plan.assignments[empty].push(moved);
    }
    for a in &mut plan.assignments {
        a.sort_unstable();
    }
    Ok(plan)
}

/// Splits row indices `0..labels.len()` among clients.
pub fn partition_indices(labels: &[usize], class_count: usize, spec: &PartitionSpec) -> Result<PartitionPlan> {
    spec.validate()?;
    match spec.mode {
        PartitionMode::Iid => iid_plan(labels, class_count, spec),
        PartitionMode::Dirichlet => dirichlet_plan(labels, class_count, spec),
    }
}

pub fn partition(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<Dataset>> {
    let plan = partition_indices(dataset.labels(), dataset.class_count(), spec)?;
    Ok(plan.assignments.iter().map(|idx| dataset.subset(idx)).collect())
}
