use rand::seq::index::sample;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::PredictionVector;
use crate::rng::seeded_rng;

pub const NONMEMBER: usize = 0;
pub const MEMBER: usize = 1;

/// How a prediction vector becomes an attack feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// Probabilities sorted in descending order (class-agnostic).
    Sorted,
    /// Probabilities in class order.
    Raw,
}

impl FeatureMode {
    pub fn row(self, p: &PredictionVector) -> Vec<f64> {
        match self {
            FeatureMode::Sorted => p.sorted_desc(),
            FeatureMode::Raw => p.probs().to_vec(),
        }
    }
}

/// Feature rows derived from prediction vectors, with membership (or owner)
/// labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl AttackDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.class_count];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        let dim = self.features.first().map_or(0, Vec::len);
        Dataset::new(self.features.concat(), dim, self.labels.clone(), self.class_count)
    }

    /// Builds a multi-class set from one group of prediction vectors per
    /// class, optionally undersampling every group to the smallest size.
    pub fn from_groups(groups: &[Vec<PredictionVector>], mode: FeatureMode, balance: bool, seed: u64) -> Result<Self> {
        if groups.iter().any(Vec::is_empty) {
            return Err(Error::arg("every attack class needs at least one sample"));
        }
        let target = groups.iter().map(Vec::len).min().unwrap_or(0);
        let mut rng = seeded_rng(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (class, group) in groups.iter().enumerate() {
            let picked: Vec<usize> = if balance && group.len() > target {
                let mut idx = sample(&mut rng, group.len(), target).into_vec();
                idx.sort_unstable();
                idx
            } else {
                (0..group.len()).collect()
            };
            for i in picked {
                features.push(mode.row(&group[i]));
                labels.push(class);
            }
        }
        Ok(AttackDataset { features, labels, class_count: groups.len() })
    }
}

/// Binary member/non-member set from sorted prediction vectors. Members get
/// label [`MEMBER`], non-members [`NONMEMBER`]; with `balance`, the larger
/// side is undersampled to the smaller.
pub fn build_attack_set(
    member_preds: &[PredictionVector],
    nonmember_preds: &[PredictionVector],
    balance: bool,
    seed: u64,
) -> Result<AttackDataset> {
    if member_preds.is_empty() || nonmember_preds.is_empty() {
        return Err(Error::arg("attack set needs members and non-members"));
    }
    // Group order follows the label constants.
    AttackDataset::from_groups(&[nonmember_preds.to_vec(), member_preds.to_vec()], FeatureMode::Sorted, balance, seed)
}
