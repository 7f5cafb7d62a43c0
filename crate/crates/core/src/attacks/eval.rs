use serde::{Deserialize, Serialize};

use super::{AttackVerdict, Membership};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Membership,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Blind-guess accuracy, `1 / classes.len()`.
    pub baseline: f64,
    pub classes: Vec<Membership>,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[truth][predicted]`, indexed like `classes`.
    pub confusion: Vec<Vec<usize>>,
    pub count: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores verdicts against ground truth over the attack's class set.
/// Undefined precision/recall/F1 (zero denominators) count as 0.
pub fn evaluate_attack(
    verdicts: &[AttackVerdict],
    truth: &[Membership],
    classes: &[Membership],
) -> Result<AttackMetrics> {
    if verdicts.len() != truth.len() {
        return Err(Error::arg(format!("{} verdicts for {} ground-truth labels", verdicts.len(), truth.len())));
    }
    if classes.is_empty() {
        return Err(Error::arg("attack has no classes"));
    }
    let index = |m: Membership| {
        classes.iter().position(|&c| c == m).ok_or_else(|| Error::arg(format!("{m} is not an attack class")))
    };
    let k = classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (v, &t) in verdicts.iter().zip(truth) {
        confusion[index(t)?][index(v.predicted)?] += 1;
    }
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion[i][i];
            let predicted: usize = (0..k).map(|r| confusion[r][i]).sum();
            let support: usize = confusion[i].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassMetrics { class: classes[i], precision, recall, f1, support }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(AttackMetrics {
        accuracy: ratio(correct, verdicts.len()),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        baseline: 1.0 / k as f64,
        classes: classes.to_vec(),
        per_class,
        confusion,
        count: verdicts.len(),
    })
}
