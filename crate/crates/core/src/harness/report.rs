use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AttackKind, ScenarioConfig};
use super::scenario::ScenarioOutcome;
use crate::attacks::{AttackMetrics, Membership, Threshold};
use crate::error::{Error, Result};
use crate::swarm::RoundLog;

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const REPORT_FILE: &str = "report.json";
pub const VERDICTS_FILE: &str = "verdicts.csv";
pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const TRACE_FILE: &str = "mmd_trace.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerMetrics {
    pub attacker_id: usize,
    pub metrics: AttackMetrics,
}

/// Accuracy of the queried global model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    /// On the union of client training sets.
    pub train_accuracy: f64,
    /// On the shared test set.
    pub test_accuracy: f64,
    pub generalization_gap: f64,
    pub per_client_train_accuracy: Vec<f64>,
    pub per_client_test_accuracy: Vec<f64>,
    pub client_train_sizes: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackDetails {
    pub target_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<Threshold>,
    /// One entry per trained attack model.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub attack_train_accuracy: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub attack_holdout_accuracy: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub attack_train_class_counts: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel_exponent: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub aggregator_id: usize,
    pub shared_test_acc: f64,
    pub mean_client_train_acc: f64,
}

impl From<&RoundLog> for RoundSummary {
    fn from(log: &RoundLog) -> Self {
        let n = log.per_client_train_acc.len().max(1) as f64;
        RoundSummary {
            round: log.round,
            aggregator_id: log.aggregator_id,
            shared_test_acc: log.shared_test_acc,
            mean_client_train_acc: log.per_client_train_acc.iter().sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub artifact_version: String,
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub attack: AttackKind,
    pub metrics: AttackMetrics,
    /// Filled for multi-to-one runs, one entry per attacking client.
    pub per_attacker: Vec<AttackerMetrics>,
    pub model: ModelSummary,
    pub details: AttackDetails,
    pub rounds: Vec<RoundSummary>,
    /// Full round logs, relative to the report.
    pub round_log_file: String,
    pub wall_clock_ms: u64,
}

impl ExperimentReport {
    /// Pretty JSON with the wall clock zeroed; equal configs give equal bytes.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.wall_clock_ms = 0;
        Ok(serde_json::to_string_pretty(&copy)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub target_index: usize,
    pub attacker_id: usize,
    pub truth: Membership,
    pub predicted: Membership,
    pub score: f64,
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn verdicts_csv(rows: &[VerdictRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Format { file: VERDICTS_FILE.into(), message: e.to_string() })
}

pub fn json_lines<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Writes report, verdicts, and round logs into `dir`, plus the MMD trace
/// when `trace` is set and the attack produced one.
pub fn write_outputs(outcome: &ScenarioOutcome, dir: &Path, trace: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join(REPORT_FILE), outcome.report.to_json()?.as_bytes())?;
    write_atomic(&dir.join(VERDICTS_FILE), &verdicts_csv(&outcome.verdicts)?)?;
    write_atomic(&dir.join(ROUNDS_FILE), &json_lines(&outcome.round_logs)?)?;
    if trace && !outcome.traces.is_empty() {
        write_atomic(&dir.join(TRACE_FILE), &json_lines(&outcome.traces)?)?;
    }
    Ok(())
}
