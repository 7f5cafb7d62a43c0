use std::path::Path;

use serde::Serialize;

use super::report::{write_atomic, ExperimentReport};
use crate::error::{Error, Result};

pub const PLOT_COLUMNS: [&str; 5] = ["axis", "value", "accuracy", "macro_f1", "baseline"];

/// One plotted point: the swept value on x, attack accuracy on y.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub axis: String,
    /// Compact JSON of the swept value.
    pub value: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub baseline: f64,
}

impl PlotPoint {
    pub fn new(axis: &str, value: &serde_json::Value, report: &ExperimentReport) -> Self {
        PlotPoint {
            axis: axis.to_string(),
            value: value.to_string(),
            accuracy: report.metrics.accuracy,
            macro_f1: report.metrics.macro_f1,
            baseline: report.metrics.baseline,
        }
    }
}

pub fn plotdata_csv(points: &[PlotPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PLOT_COLUMNS)?;
    for p in points {
        w.write_record([
            p.axis.clone(),
            p.value.clone(),
            p.accuracy.to_string(),
            p.macro_f1.to_string(),
            p.baseline.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Format { file: "plotdata".into(), message: e.to_string() })
}

/// Writes one plot-data CSV; an empty point list gives a header-only file.
pub fn emit_plotdata(path: &Path, points: &[PlotPoint]) -> Result<()> {
    write_atomic(path, &plotdata_csv(points)?)
}
