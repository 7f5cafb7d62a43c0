//! Training-time defenses (dropout after hidden activations, L2 weight
//! decay) and paired defended/undefended comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{run_scenario, AttackKind, ExperimentReport, ScenarioConfig};
use crate::nn::{LayerSpec, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DefenseSpec {
    /// Dropout rates for the first hidden layers, in order. Empty disables
    /// dropout.
    pub dropout_rates: Vec<f64>,
    pub l2_lambda: f64,
}

impl DefenseSpec {
    pub fn none() -> Self {
        DefenseSpec::default()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.dropout_rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::arg(format!("dropout rate {r} outside [0, 1)")));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::arg("l2 lambda must be nonnegative"));
        }
        Ok(())
    }
}

/// Returns copies of the layer specs and training config with the defense
/// applied: `dropout_rates[i]` goes on hidden layer `i` and `l2_lambda`
/// replaces the configured weight decay.
pub fn apply_defense(
    base_layers: &[LayerSpec],
    train_cfg: &TrainConfig,
    spec: &DefenseSpec,
) -> Result<(Vec<LayerSpec>, TrainConfig)> {
    spec.validate()?;
    let hidden = base_layers.len().saturating_sub(1);
    if spec.dropout_rates.len() > hidden {
        return Err(Error::arg(format!("{} dropout rates for {hidden} hidden layers", spec.dropout_rates.len())));
    }
    let mut layers = base_layers.to_vec();
    for (layer, &rate) in layers.iter_mut().zip(&spec.dropout_rates) {
        layer.dropout_rate = rate;
    }
    let cfg = TrainConfig { l2_lambda: spec.l2_lambda, ..*train_cfg };
    Ok((layers, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseDelta {
    pub attack_accuracy: f64,
    pub macro_f1: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub generalization_gap: f64,
}

/// Same scenario and seeds, run with and without a defense. Deltas are
/// `defended - undefended`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    pub defense: DefenseSpec,
    pub undefended: ExperimentReport,
    pub defended: ExperimentReport,
    pub delta: DefenseDelta,
}

pub fn defense_comparison(
    scenario: &ScenarioConfig,
    defense: &DefenseSpec,
    attack: AttackKind,
) -> Result<PairedReport> {
    let mut plain = scenario.clone();
    plain.attack = attack;
    plain.defense = DefenseSpec::none();
    let mut guarded = plain.clone();
    guarded.defense = defense.clone();

    let (a, b) = rayon::join(|| run_scenario(&plain), || run_scenario(&guarded));
    let (undefended, defended) = (a?.report, b?.report);
    let delta = DefenseDelta {
        attack_accuracy: defended.metrics.accuracy - undefended.metrics.accuracy,
        macro_f1: defended.metrics.macro_f1 - undefended.metrics.macro_f1,
        train_accuracy: defended.model.train_accuracy - undefended.model.train_accuracy,
        test_accuracy: defended.model.test_accuracy - undefended.model.test_accuracy,
        generalization_gap: defended.model.generalization_gap - undefended.model.generalization_gap,
    };
    Ok(PairedReport { defense: defense.clone(), undefended, defended, delta })
}
