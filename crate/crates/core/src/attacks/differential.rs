//! Differential attacks: classify a target by how appending it to each
//! client's reference member set moves MMD distances.
//!
//! Reference member sets are the model's predictions on samples known to
//! belong to each client, which makes these audits rather than realistic
//! adversaries. The kernel bandwidth is resolved once over the pooled
//! references so that distances for different clients are comparable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mmd::{GaussianKernel, MmdConfig, MmdReference};
use super::{AttackVerdict, Membership};
use crate::error::{Error, Result};
use crate::nn::PredictionVector;

#[derive(Debug, Clone)]
pub struct MemberReference {
    pub client_id: usize,
    pub preds: Vec<PredictionVector>,
}

/// Every intermediate distance behind one verdict, in reference order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialTrace {
    pub target_index: usize,
    pub client_ids: Vec<usize>,
    /// v1: `mmd(A_k, B)`. v2: `mmd(A_k, rest_k)`.
    pub baseline: Vec<f64>,
    /// v1: `mmd(A_k + y, B)`. v2: `mmd(A_k + y, rest_k)`.
    pub with_target: Vec<f64>,
    /// v2 only: `mmd(A_k, B)`.
    pub test_baseline: Option<Vec<f64>>,
    /// v2 only: `mmd(A_k + y, B)`.
    pub test_with_target: Option<Vec<f64>>,
    pub chosen_client: usize,
    pub predicted: Membership,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct DifferentialOutcome {
    pub verdicts: Vec<AttackVerdict>,
    pub traces: Vec<DifferentialTrace>,
    pub kernel: GaussianKernel,
}

fn pooled_kernel(
    refs: &[MemberReference],
    nonmember_ref: &[PredictionVector],
    cfg: &MmdConfig,
) -> Result<GaussianKernel> {
    if refs.iter().any(|r| r.preds.is_empty()) || nonmember_ref.is_empty() {
        return Err(Error::arg("differential attack reference sets must be nonempty"));
    }
    let mut pools: Vec<&[PredictionVector]> = refs.iter().map(|r| r.preds.as_slice()).collect();
    pools.push(nonmember_ref);
    cfg.kernel(&pools)
}

/// First index of the maximum; ties resolve to the smallest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn outcome(traces: Vec<DifferentialTrace>, kernel: GaussianKernel) -> DifferentialOutcome {
    let verdicts = traces
        .iter()
        .map(|t| AttackVerdict { target_index: t.target_index, predicted: t.predicted, score: t.score })
        .collect();
    DifferentialOutcome { verdicts, traces, kernel }
}

/// For each target `y` and client `k`, `gap_k = mmd(A_k + y, B) - mmd(A_k, B)`.
/// The target is a member of the client with the largest gap if that gap is
/// positive, otherwise a non-member. Score is the largest gap.
pub fn differential_attack_v1(
    targets: &[PredictionVector],
    member_refs: &[MemberReference],
    nonmember_ref: &[PredictionVector],
    cfg: &MmdConfig,
) -> Result<DifferentialOutcome> {
    if member_refs.is_empty() {
        return Err(Error::arg("differential attack needs at least one client reference"));
    }
    let kernel = pooled_kernel(member_refs, nonmember_ref, cfg)?;
    let refs: Vec<MmdReference<'_>> =
        member_refs.iter().map(|r| MmdReference::new(&r.preds, nonmember_ref, kernel)).collect::<Result<_>>()?;
    let baseline: Vec<f64> = refs.iter().map(MmdReference::distance).collect();
    let ids: Vec<usize> = member_refs.iter().map(|r| r.client_id).collect();

    let traces = targets
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let with_target: Vec<f64> = refs.iter().map(|r| r.distance_with(y)).collect();
            let gaps: Vec<f64> = with_target.iter().zip(&baseline).map(|(w, b)| w - b).collect();
            let k = argmax(&gaps);
            let predicted = if gaps[k] > 0.0 { Membership::Member(ids[k]) } else { Membership::Nonmember };
            DifferentialTrace {
                target_index: i,
                client_ids: ids.clone(),
                baseline: baseline.clone(),
                with_target,
                test_baseline: None,
                test_with_target: None,
                chosen_client: ids[k],
                predicted,
                score: gaps[k],
            }
        })
        .collect();
    Ok(outcome(traces, kernel))
}

/// Decision rule for [`differential_attack_v2_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V2Rule {
    /// Attribute to the client whose separation from its peers grows most
    /// when `y` is added, `k* = argmax_k [mmd(A_k + y, rest_k) - mmd(A_k, rest_k)]`;
    /// member iff that gain is positive. Only inter-client distances decide;
    /// the distances to `B` are computed for the trace. Score is the gain.
    #[default]
    PeerGain,
    /// Compare distance levels: `k* = argmax_k mmd(A_k + y, rest_k)`, member
    /// iff that exceeds `mmd(A_{k*} + y, B)`. Score is `a_{k*}`. The levels
    /// are dominated by how distinct each whole reference set is, so under
    /// non-IID data this tends to send every target to one client.
    Literal,
}

/// Inter-client differential attack with the default [`V2Rule::PeerGain`].
pub fn differential_attack_v2(
    targets: &[PredictionVector],
    member_refs: &[MemberReference],
    nonmember_ref: &[PredictionVector],
    cfg: &MmdConfig,
) -> Result<DifferentialOutcome> {
    differential_attack_v2_with(targets, member_refs, nonmember_ref, cfg, V2Rule::PeerGain)
}

/// For each target `y` and client `k`, compares `A_k + y` against the union
/// of the other clients' references (`rest_k`) and against the non-member
/// reference `B`; `rule` turns those distances into a verdict.
pub fn differential_attack_v2_with(
    targets: &[PredictionVector],
    member_refs: &[MemberReference],
    nonmember_ref: &[PredictionVector],
    cfg: &MmdConfig,
    rule: V2Rule,
) -> Result<DifferentialOutcome> {
    if member_refs.len() < 2 {
        return Err(Error::arg("differential attack v2 needs at least two clients"));
    }
    let kernel = pooled_kernel(member_refs, nonmember_ref, cfg)?;
    let rests: Vec<Vec<PredictionVector>> = (0..member_refs.len())
        .map(|k| {
            member_refs.iter().enumerate().filter(|&(j, _)| j != k).flat_map(|(_, r)| r.preds.iter().cloned()).collect()
        })
        .collect();
    let peer_refs: Vec<MmdReference<'_>> = member_refs
        .iter()
        .zip(&rests)
        .map(|(r, rest)| MmdReference::new(&r.preds, rest, kernel))
        .collect::<Result<_>>()?;
    let test_refs: Vec<MmdReference<'_>> =
        member_refs.iter().map(|r| MmdReference::new(&r.preds, nonmember_ref, kernel)).collect::<Result<_>>()?;
    let baseline: Vec<f64> = peer_refs.iter().map(MmdReference::distance).collect();
    let test_baseline: Vec<f64> = test_refs.iter().map(MmdReference::distance).collect();
    let ids: Vec<usize> = member_refs.iter().map(|r| r.client_id).collect();

    let traces = targets
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let with_target: Vec<f64> = peer_refs.iter().map(|r| r.distance_with(y)).collect();
            let test: Vec<f64> = test_refs.iter().map(|r| r.distance_with(y)).collect();
            let (k, member, score) = match rule {
                V2Rule::PeerGain => {
                    let gain: Vec<f64> = with_target.iter().zip(&baseline).map(|(w, b)| w - b).collect();
                    let k = argmax(&gain);
                    (k, gain[k] > 0.0, gain[k])
                }
                V2Rule::Literal => {
                    let k = argmax(&with_target);
                    (k, with_target[k] > test[k], with_target[k])
                }
            };
            let predicted = if member { Membership::Member(ids[k]) } else { Membership::Nonmember };
            DifferentialTrace {
                target_index: i,
                client_ids: ids.clone(),
                baseline: baseline.clone(),
                with_target: with_target.clone(),
                test_baseline: Some(test_baseline.clone()),
                test_with_target: Some(test),
                chosen_client: ids[k],
                predicted,
                score,
            }
        })
        .collect();
    Ok(outcome(traces, kernel))
}
