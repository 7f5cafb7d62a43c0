//! Single-shadow NN attacks. The attacking client's own local data and the
//! broadcast model play the shadow role, so only the attack classifier is
//! trained.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AttackVerdict, Membership};
use crate::data::{AttackDataset, Dataset, FeatureMode, MEMBER};
use crate::error::{Error, Result};
use crate::nn::{accuracy, forward, predict, train_local, LayerSpec, Mode, ModelParams, PredictionVector, TrainConfig};
use crate::rng::{derive_seed, seeded_rng};
use crate::swarm::ClientState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackModelConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2_lambda: f64,
    /// Share of the attacker's member rows kept out of attack training and
    /// used, with the shadow-test rows, to measure held-out accuracy.
    pub holdout_fraction: f64,
}

impl Default for AttackModelConfig {
    fn default() -> Self {
        AttackModelConfig {
            hidden: vec![64, 32],
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 16,
            l2_lambda: 0.0,
            holdout_fraction: 0.2,
        }
    }
}

impl AttackModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::arg("attack hidden layers must be nonempty"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::arg("holdout fraction must lie in [0, 1)"));
        }
        self.train_cfg(0).validate()
    }

    fn train_cfg(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            l2_lambda: self.l2_lambda,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }

    fn fit(&self, set: &AttackDataset, seed: u64) -> Result<(ModelParams, f64)> {
        let data = set.to_dataset()?;
        let specs = LayerSpec::mlp(data.dim(), &self.hidden, set.class_count);
        let init = ModelParams::init(&specs, &mut seeded_rng(derive_seed(seed, "attack-init", 0)))?;
        let model = train_local(&init, &data, &self.train_cfg(derive_seed(seed, "attack-train", 0)))?;
        let acc = accuracy(&model, &data)?;
        Ok((model, acc))
    }
}

#[derive(Debug, Clone)]
pub struct ShadowAttack {
    pub model: ModelParams,
    pub features: FeatureMode,
    pub train_accuracy: f64,
    /// Balanced accuracy proxy on held-out attacker members vs shadow-test
    /// rows; `None` when nothing was held out.
    pub holdout_accuracy: Option<f64>,
    /// `[non-members, members]` in the attack training set.
    pub train_class_counts: Vec<usize>,
}

impl ShadowAttack {
    /// Attack-model probability that `p` comes from a training member.
    pub fn member_probability(&self, p: &PredictionVector) -> Result<f64> {
        let out = forward(&self.model, &self.features.row(p), Mode::Eval)?;
        Ok(out.probs()[MEMBER])
    }
}

/// Trains the binary attack model. Members are the attacker's local
/// training rows, non-members the shadow-train rows, both passed through
/// the broadcast model.
pub fn shadow_attack_train(
    attacker: &ClientState,
    global: &ModelParams,
    shadow_train: &Dataset,
    shadow_test: &Dataset,
    cfg: &AttackModelConfig,
    balance: bool,
    seed: u64,
) -> Result<ShadowAttack> {
    cfg.validate()?;
    if attacker.train_data.is_empty() || shadow_train.is_empty() {
        return Err(Error::arg("shadow attack needs member and non-member pools"));
    }
    let members = predict(global, &attacker.train_data)?;
    let nonmembers = predict(global, shadow_train)?;

    let mut order: Vec<usize> = (0..members.len()).collect();
    order.shuffle(&mut seeded_rng(derive_seed(seed, "holdout", 0)));
    let n_hold = ((cfg.holdout_fraction * members.len() as f64).round() as usize).min(members.len().saturating_sub(1));
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let pick = |idx: &[usize]| idx.iter().map(|&i| members[i].clone()).collect::<Vec<_>>();

    let set = AttackDataset::from_groups(
        &[nonmembers, pick(train_idx)],
        FeatureMode::Sorted,
        balance,
        derive_seed(seed, "balance", 0),
    )?;
    let (model, train_accuracy) = cfg.fit(&set, seed)?;
    let mut attack = ShadowAttack {
        model,
        features: FeatureMode::Sorted,
        train_accuracy,
        holdout_accuracy: None,
        train_class_counts: set.class_counts(),
    };

    if !hold_idx.is_empty() && !shadow_test.is_empty() {
        let held = AttackDataset::from_groups(
            &[predict(global, shadow_test)?, pick(hold_idx)],
            FeatureMode::Sorted,
            true,
            derive_seed(seed, "holdout-balance", 0),
        )?;
        attack.holdout_accuracy = Some(accuracy(&attack.model, &held.to_dataset()?)?);
    }
    Ok(attack)
}

/// One verdict per target row: member of `member_as` iff the attack model's
/// member probability is at least 0.5.
pub fn shadow_attack_infer(
    attack: &ShadowAttack,
    global: &ModelParams,
    targets: &Dataset,
    member_as: usize,
) -> Result<Vec<AttackVerdict>> {
    predict(global, targets)?
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let score = attack.member_probability(p)?;
            Ok(AttackVerdict {
                target_index: i,
                predicted: if score >= 0.5 { Membership::Member(member_as) } else { Membership::Nonmember },
                score,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MultiAttackOutcome {
    pub model: ModelParams,
    /// Attack classes in model-output order: non-member first, then victims.
    pub classes: Vec<Membership>,
    pub train_accuracy: f64,
    pub verdicts: Vec<AttackVerdict>,
}

/// Multi-class attack attributing targets to one of several victims or to
/// no one. Training groups are predictions on each victim's known member
/// rows plus the non-member shadow rows. Features keep class order, since
/// owner attribution rests on which classes each client holds.
pub fn one_to_multi_attack(
    global: &ModelParams,
    victim_shadow_sets: &[(usize, &Dataset)],
    nonmember_shadow: &Dataset,
    targets: &Dataset,
    cfg: &AttackModelConfig,
    seed: u64,
) -> Result<MultiAttackOutcome> {
    cfg.validate()?;
    if victim_shadow_sets.is_empty() {
        return Err(Error::arg("one-to-multi attack needs at least one victim"));
    }
    let mut classes = vec![Membership::Nonmember];
    let mut groups = vec![predict(global, nonmember_shadow)?];
    for (id, data) in victim_shadow_sets {
        classes.push(Membership::Member(*id));
        groups.push(predict(global, data)?);
    }
    let set = AttackDataset::from_groups(&groups, FeatureMode::Raw, true, derive_seed(seed, "balance", 0))?;
    let (model, train_accuracy) = cfg.fit(&set, seed)?;
    let verdicts = predict(global, targets)?
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let out = forward(&model, &FeatureMode::Raw.row(p), Mode::Eval)?;
            let cls = out.argmax();
            Ok(AttackVerdict { target_index: i, predicted: classes[cls], score: out.probs()[cls] })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiAttackOutcome { model, classes, train_accuracy, verdicts })
}
