//! Threshold attacks on scalar statistics of the prediction vector.

use serde::{Deserialize, Serialize};

use super::{AttackVerdict, Membership};
use crate::error::{Error, Result};
use crate::nn::{PredictionVector, LOG_CLAMP};

/// Largest class probability.
pub fn prediction_confidence(v: &PredictionVector) -> f64 {
    v.probs().iter().copied().fold(0.0, f64::max)
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn prediction_entropy(v: &PredictionVector) -> f64 {
    let h: f64 = v.probs().iter().map(|&p| -p * p.max(LOG_CLAMP).ln()).sum();
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Confidence,
    Entropy,
}

impl Metric {
    pub fn value(self, v: &PredictionVector) -> f64 {
        match self {
            Metric::Confidence => prediction_confidence(v),
            Metric::Entropy => prediction_entropy(v),
        }
    }

    /// Members are more confident and less uncertain than non-members.
    pub fn says_member(self, value: f64, tau: f64) -> bool {
        match self {
            Metric::Confidence => value >= tau,
            Metric::Entropy => value <= tau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub metric: Metric,
    pub tau: f64,
    /// Balanced accuracy of `tau` on the calibration data.
    pub balanced_accuracy: f64,
}

/// Midpoints between consecutive distinct calibration values, ascending.
/// A single distinct value is its own only candidate.
pub fn threshold_candidates(members: &[f64], nonmembers: &[f64]) -> Vec<f64> {
    let mut values: Vec<f64> = members.iter().chain(nonmembers).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() < 2 {
        return values;
    }
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

pub fn balanced_accuracy(metric: Metric, tau: f64, members: &[f64], nonmembers: &[f64]) -> f64 {
    let tpr = members.iter().filter(|&&v| metric.says_member(v, tau)).count() as f64 / members.len() as f64;
    let tnr = nonmembers.iter().filter(|&&v| !metric.says_member(v, tau)).count() as f64 / nonmembers.len() as f64;
    0.5 * (tpr + tnr)
}

/// Picks the candidate threshold with the best balanced accuracy on the
/// calibration data; ties go to the smaller threshold.
pub fn calibrate_threshold(metric: Metric, members: &[f64], nonmembers: &[f64]) -> Result<Threshold> {
    if members.is_empty() || nonmembers.is_empty() {
        return Err(Error::arg("metric calibration needs members and non-members"));
    }
    let mut best: Option<Threshold> = None;
    for tau in threshold_candidates(members, nonmembers) {
        let acc = balanced_accuracy(metric, tau, members, nonmembers);
        if best.is_none_or(|b| acc > b.balanced_accuracy) {
            best = Some(Threshold { metric, tau, balanced_accuracy: acc });
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Calibrates on the attacker's own member/non-member metric values, then
/// labels each target. Members are attributed to `member_as`.
pub fn metric_attack(
    metric: Metric,
    member_calibration: &[f64],
    nonmember_calibration: &[f64],
    targets: &[PredictionVector],
    member_as: usize,
) -> Result<(Threshold, Vec<AttackVerdict>)> {
    let threshold = calibrate_threshold(metric, member_calibration, nonmember_calibration)?;
    let verdicts = targets
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let v = metric.value(p);
            AttackVerdict {
                target_index: i,
                predicted: if metric.says_member(v, threshold.tau) {
                    Membership::Member(member_as)
                } else {
                    Membership::Nonmember
                },
                score: v,
            }
        })
        .collect();
    Ok((threshold, verdicts))
}
