use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use super::config::ScenarioConfig;
use super::plotdata::{emit_plotdata, PlotPoint};
use super::report::{write_atomic, ExperimentReport};
use super::scenario::run_scenario;
use crate::error::{Error, Result};

const ALIASES: &[(&str, &str)] = &[
    ("client_count", "partition.client_count"),
    ("alpha", "partition.alpha"),
    ("partition_mode", "partition.mode"),
    ("weights", "swarm.weights"),
    ("rounds", "swarm.rounds"),
    ("local_epochs", "swarm.local_epochs"),
    ("learning_rate", "swarm.learning_rate"),
    ("dropout", "defense.dropout_rates"),
    ("dropout_rates", "defense.dropout_rates"),
    ("l2", "defense.l2_lambda"),
    ("l2_lambda", "defense.l2_lambda"),
    ("sigma", "mmd.sigma"),
    ("kernel_exponent", "mmd.kernel_exponent"),
];

/// Maps a short axis name to its dotted config path. Dotted paths pass
/// through unchanged.
pub fn resolve_axis(axis: &str) -> String {
    ALIASES.iter().find(|(k, _)| *k == axis).map_or_else(|| axis.to_string(), |(_, v)| v.to_string())
}

/// Returns a copy of `base` with `axis` set to `value`, re-validated.
pub fn apply_axis(base: &ScenarioConfig, axis: &str, value: &Value) -> Result<ScenarioConfig> {
    let path = resolve_axis(axis);
    let mut doc = serde_json::to_value(base)?;
    let mut slot = &mut doc;
    for key in path.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|m| m.get_mut(key))
            .ok_or_else(|| Error::config(axis, format!("unknown sweep axis `{axis}`")))?;
    }
    *slot = value.clone();
    ScenarioConfig::from_json(&doc.to_string()).map_err(|e| match e {
        Error::Config { path, message } => Error::config(path, format!("{message} (sweep {axis}={value})")),
        other => other,
    })
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: String,
    pub values: Vec<Value>,
    pub reports: Vec<ExperimentReport>,
}

impl SweepResult {
    pub fn points(&self) -> Vec<PlotPoint> {
        self.values.iter().zip(&self.reports).map(|(v, r)| PlotPoint::new(&self.axis, v, r)).collect()
    }
}

/// One scenario per value, run concurrently. Every config is built and
/// validated before anything runs.
pub fn sweep(base: &ScenarioConfig, axis: &str, values: &[Value]) -> Result<SweepResult> {
    let configs = values.iter().map(|v| apply_axis(base, axis, v)).collect::<Result<Vec<_>>>()?;
    let reports = configs.par_iter().map(|c| run_scenario(c).map(|o| o.report)).collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis: axis.to_string(), values: values.to_vec(), reports })
}

/// `report_<i>.json` per value, the aggregate `sweep.csv`, and the plot
/// data file `plot_<axis>.csv`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, r) in result.reports.iter().enumerate() {
        write_atomic(&dir.join(format!("report_{i}.json")), r.to_json()?.as_bytes())?;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "axis",
        "value",
        "accuracy",
        "macro_f1",
        "macro_precision",
        "macro_recall",
        "baseline",
        "train_accuracy",
        "test_accuracy",
        "generalization_gap",
    ])?;
    for (v, r) in result.values.iter().zip(&result.reports) {
        let m = &r.metrics;
        w.write_record([
            result.axis.clone(),
            v.to_string(),
            m.accuracy.to_string(),
            m.macro_f1.to_string(),
            m.macro_precision.to_string(),
            m.macro_recall.to_string(),
            m.baseline.to_string(),
            r.model.train_accuracy.to_string(),
            r.model.test_accuracy.to_string(),
            r.model.generalization_gap.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format { file: dir.join("sweep.csv"), message: e.to_string() })?;
    write_atomic(&dir.join("sweep.csv"), &bytes)?;
    let name = resolve_axis(&result.axis).replace('.', "_");
    emit_plotdata(&dir.join(format!("plot_{name}.csv")), &result.points())
}
