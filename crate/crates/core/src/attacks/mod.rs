//! Membership-inference attacks against the swarm's broadcast model:
//! the single-shadow NN attack (binary and owner-attributing), threshold
//! attacks on confidence and entropy, and MMD-based differential attacks.

mod differential;
mod eval;
mod metric;
mod mmd;
mod shadow;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use crate::data::{build_attack_set, AttackDataset, FeatureMode};
pub use differential::{
    differential_attack_v1, differential_attack_v2, differential_attack_v2_with, DifferentialOutcome,
    DifferentialTrace, MemberReference, V2Rule,
};
pub use eval::{evaluate_attack, AttackMetrics, ClassMetrics};
pub use metric::{
    balanced_accuracy, calibrate_threshold, metric_attack, prediction_confidence, prediction_entropy,
    threshold_candidates, Metric, Threshold,
};
pub use mmd::{median_pairwise_distance, mmd, mmd_squared, Bandwidth, GaussianKernel, MmdConfig, MmdReference};
pub use shadow::{
    one_to_multi_attack, shadow_attack_infer, shadow_attack_train, AttackModelConfig, MultiAttackOutcome, ShadowAttack,
};

/// Attack decision for one target: not a member, or a member of the given
/// (1-based) client's training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Membership {
    Nonmember,
    Member(usize),
}

impl fmt::Display for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Membership::Nonmember => f.write_str("nonmember"),
            Membership::Member(k) => write!(f, "member_of_client_{k}"),
        }
    }
}

impl FromStr for Membership {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "nonmember" {
            return Ok(Membership::Nonmember);
        }
        s.strip_prefix("member_of_client_")
            .and_then(|k| k.parse().ok())
            .map(Membership::Member)
            .ok_or_else(|| format!("unknown membership {s:?}"))
    }
}

impl Serialize for Membership {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Membership {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackVerdict {
    pub target_index: usize,
    pub predicted: Membership,
    /// Attack-model probability, metric value, or MMD gap, depending on the
    /// attack.
    pub score: f64,
}
