use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackModelConfig, MmdConfig, V2Rule};
use crate::data::{PartitionMode, SplitFractions};
use crate::defenses::DefenseSpec;
use crate::error::{Error, Result};
use crate::swarm::Election;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic { class_count: usize, per_class: usize, dim: usize, spread: f64 },
    Idx { images: PathBuf, labels: PathBuf },
    Csv { path: PathBuf, label_column: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub mode: PartitionMode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub client_count: usize,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden: vec![64] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwarmSettings {
    pub rounds: usize,
    pub local_epochs: usize,
    pub election: Election,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2_lambda: f64,
    /// Aggregation weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
}

impl Default for SwarmSettings {
    fn default() -> Self {
        SwarmSettings {
            rounds: 10,
            local_epochs: 5,
            election: Election::RoundRobin,
            learning_rate: 0.05,
            batch_size: 16,
            l2_lambda: 0.0,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    ShadowOneToOne,
    ShadowMultiToOne,
    ShadowOneToMulti,
    MetricConfidence,
    MetricEntropy,
    DifferentialV1,
    DifferentialV2,
}

impl AttackKind {
    /// Attacks that attribute targets among several victims.
    pub fn is_multi_victim(self) -> bool {
        matches!(self, AttackKind::ShadowOneToMulti | AttackKind::DifferentialV1 | AttackKind::DifferentialV2)
    }
}

/// One experiment, end to end. Every random choice derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitFractions,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub swarm: SwarmSettings,
    pub attack: AttackKind,
    /// Defaults to the last client.
    #[serde(default)]
    pub attacker_id: Option<usize>,
    /// Defaults to client 1 for single-victim attacks and to every other
    /// client for multi-victim ones.
    #[serde(default)]
    pub victim_ids: Option<Vec<usize>>,
    #[serde(default = "default_true")]
    pub balance_attack_set: bool,
    #[serde(default)]
    pub attack_model: AttackModelConfig,
    #[serde(default)]
    pub mmd: MmdConfig,
    #[serde(default)]
    pub differential_v2_rule: V2Rule,
    #[serde(default)]
    pub defense: DefenseSpec,
    /// Cap on evaluation targets per attack class.
    #[serde(default = "default_max_targets")]
    pub max_targets_per_class: usize,
    /// Query this round's broadcast snapshot instead of the final model.
    #[serde(default)]
    pub query_round: Option<usize>,
}

fn default_true() -> bool {
    true
}

fn default_max_targets() -> usize {
    200
}

fn check(ok: bool, path: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, message))
    }
}

fn check_weights(weights: &Option<Vec<f64>>, n: usize, path: &str) -> Result<()> {
    if let Some(w) = weights {
        check(w.len() == n, path, format!("expected {n} weights, got {}", w.len()))?;
        check(w.iter().all(|x| x.is_finite() && *x > 0.0), path, "weights must be positive")?;
        let sum: f64 = w.iter().sum();
        check((sum - 1.0).abs() <= 1e-9, path, format!("weights sum to {sum}, not 1"))?;
    }
    Ok(())
}

impl ScenarioConfig {
    /// Strict JSON parse; unknown keys are errors, reported with their path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative dataset paths resolve against the
    /// file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetSource::Idx { images, labels } => {
                fix(images);
                fix(labels);
            }
            DatasetSource::Csv { path, .. } => fix(path),
            DatasetSource::Synthetic { .. } => {}
        }
    }

    pub fn client_count(&self) -> usize {
        self.partition.client_count
    }

    pub fn attacker(&self) -> usize {
        self.attacker_id.unwrap_or(self.partition.client_count)
    }

    pub fn victims(&self) -> Vec<usize> {
        if let Some(v) = &self.victim_ids {
            return v.clone();
        }
        let attacker = self.attacker();
        if self.attack.is_multi_victim() {
            (1..=self.client_count()).filter(|&id| id != attacker).collect()
        } else {
            vec![if attacker == 1 { 2 } else { 1 }]
        }
    }

    /// Attacking clients for the multi-to-one topology: ids 2..N-1 other
    /// than the victim, or the configured attacker when that range is empty.
    pub fn multi_to_one_attackers(&self) -> Vec<usize> {
        let victim = self.victims()[0];
        let ids: Vec<usize> = (2..self.client_count()).filter(|&i| i != victim).collect();
        if ids.is_empty() {
            vec![self.attacker()]
        } else {
            ids
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.dataset {
            DatasetSource::Synthetic { class_count, per_class, dim, spread } => {
                check(*class_count >= 2, "dataset.synthetic.class_count", "must be >= 2")?;
                check(*per_class >= 1, "dataset.synthetic.per_class", "must be >= 1")?;
                check(*dim >= 2, "dataset.synthetic.dim", "must be >= 2")?;
                check(spread.is_finite() && *spread >= 0.0, "dataset.synthetic.spread", "must be a nonnegative real")?;
            }
            DatasetSource::Csv { label_column, .. } => {
                check(!label_column.is_empty(), "dataset.csv.label_column", "must not be empty")?;
            }
            DatasetSource::Idx { .. } => {}
        }
        self.split.validate().map_err(|e| Error::config("split", e.to_string()))?;

        let n = self.partition.client_count;
        check(n >= 2, "partition.client_count", "must be >= 2")?;
        check(self.partition.alpha > 0.0 && self.partition.alpha.is_finite(), "partition.alpha", "must be positive")?;
        check_weights(&self.partition.weights, n, "partition.weights")?;

        check(!self.model.hidden.contains(&0), "model.hidden", "layer widths must be positive")?;
        let s = &self.swarm;
        check(s.rounds >= 1, "swarm.rounds", "must be >= 1")?;
        check(s.local_epochs >= 1, "swarm.local_epochs", "must be >= 1")?;
        check(s.learning_rate > 0.0 && s.learning_rate.is_finite(), "swarm.learning_rate", "must be positive")?;
        check(s.batch_size >= 1, "swarm.batch_size", "must be >= 1")?;
        check(s.l2_lambda >= 0.0, "swarm.l2_lambda", "must be nonnegative")?;
        check_weights(&s.weights, n, "swarm.weights")?;

        let attacker = self.attacker();
        check((1..=n).contains(&attacker), "attacker_id", format!("must be in [1, {n}]"))?;
        let victims = self.victims();
        check(!victims.is_empty(), "victim_ids", "must not be empty")?;
        for (i, &v) in victims.iter().enumerate() {
            let path = format!("victim_ids[{i}]");
            check((1..=n).contains(&v), &path, format!("must be in [1, {n}]"))?;
            check(v != attacker, &path, "the attacker cannot be its own victim")?;
            check(!victims[..i].contains(&v), &path, "duplicate victim")?;
        }
        if matches!(self.attack, AttackKind::DifferentialV2) {
            check(victims.len() >= 2, "victim_ids", "differential_v2 needs at least 2 victims")?;
        }

        self.attack_model.validate().map_err(|e| Error::config("attack_model", e.to_string()))?;
        self.mmd.validate().map_err(|e| Error::config("mmd", e.to_string()))?;
        self.defense.validate().map_err(|e| Error::config("defense", e.to_string()))?;
        check(
            self.defense.dropout_rates.len() <= self.model.hidden.len(),
            "defense.dropout_rates",
            format!("at most {} rates (one per hidden layer)", self.model.hidden.len()),
        )?;
        check(self.max_targets_per_class >= 1, "max_targets_per_class", "must be >= 1")?;
        if let Some(r) = self.query_round {
            check((1..=s.rounds).contains(&r), "query_round", format!("must be in [1, {}]", s.rounds))?;
        }
        Ok(())
    }
}
