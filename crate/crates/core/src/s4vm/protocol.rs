//! Plain, grouped and renewal prediction protocols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::states::sample_rng;
use crate::svm::Dataset;

use super::candidates::{generate_candidates, S4vmConfig};
use super::grouping::{random_plan, renewal_plan, GroupingPlan, GroupingStrategy, Protocol};
use super::safe::safe_assign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S4vmPrediction {
    pub labels: Vec<Label>,
    /// Decision values of the lowest-objective candidate.
    pub decision: Vec<f64>,
    pub minimax_value: f64,
    pub slack: f64,
    pub candidates: usize,
    pub collapsed: bool,
}

pub fn s4vm_predict(labeled: &Dataset, unlabeled: &[Vec<f64>], cfg: &S4vmConfig) -> Result<S4vmPrediction> {
    let set = generate_candidates(labeled, unlabeled, cfg)?;
    let labelings: Vec<Vec<Label>> = set.candidates.iter().map(|c| c.labels.clone()).collect();
    let safe = safe_assign(&labelings, &set.baseline_labels)?;
    Ok(S4vmPrediction {
        labels: safe.labels,
        decision: set.candidates[0].decision.clone(),
        minimax_value: safe.value,
        slack: safe.slack,
        candidates: set.candidates.len(),
        collapsed: set.collapsed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    /// Positions in the unlabeled set.
    pub indices: Vec<usize>,
    pub predicted: Vec<Label>,
    pub accuracy: Option<f64>,
    pub training_size: usize,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemisupRun {
    pub protocol: Option<Protocol>,
    pub strategy: GroupingStrategy,
    pub groups: Vec<GroupResult>,
    /// Unweighted mean of the group accuracies.
    pub mean_accuracy: Option<f64>,
    /// Error that stopped the run early; `groups` holds what finished.
    pub aborted: Option<String>,
}

impl SemisupRun {
    /// Predictions in unlabeled order, for the groups that finished.
    pub fn predictions(&self, u: usize) -> Vec<Option<Label>> {
        let mut out = vec![None; u];
        for g in &self.groups {
            for (&i, &l) in g.indices.iter().zip(&g.predicted) {
                out[i] = Some(l);
            }
        }
        out
    }
}

fn accuracy(pred: &[Label], truth: &[Label]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / pred.len().max(1) as f64
}

fn group_seed(seed: u64, g: usize) -> u64 {
    seed.wrapping_add((g as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Predicts the groups in order, each time training on the labeled set plus
/// every group already predicted.
pub fn iterative_predict(
    labeled: &Dataset,
    unlabeled: &[Vec<f64>],
    truth: Option<&[Label]>,
    plan: &GroupingPlan,
    cfg: &S4vmConfig,
) -> Result<SemisupRun> {
    plan.validate(unlabeled.len())?;
    if let Some(t) = truth {
        if t.len() != unlabeled.len() {
            return Err(Error::DimensionMismatch { expected: unlabeled.len(), got: t.len() });
        }
    }
    let mut train = labeled.clone();
    let mut run = SemisupRun { protocol: None, strategy: plan.strategy, groups: Vec::new(), mean_accuracy: None, aborted: None };
    for (g, idx) in plan.groups.iter().enumerate() {
        let points: Vec<Vec<f64>> = idx.iter().map(|&i| unlabeled[i].clone()).collect();
        let group_cfg = S4vmConfig { seed: group_seed(cfg.seed, g), ..cfg.clone() };
        let pred = match s4vm_predict(&train, &points, &group_cfg) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("group {g} failed: {e}");
                run.aborted = Some(e.to_string());
                break;
            }
        };
        let acc = truth.map(|t| {
            let t: Vec<Label> = idx.iter().map(|&i| t[i]).collect();
            accuracy(&pred.labels, &t)
        });
        run.groups.push(GroupResult {
            indices: idx.clone(),
            predicted: pred.labels.clone(),
            accuracy: acc,
            training_size: train.len(),
            collapsed: pred.collapsed,
        });
        if g + 1 < plan.groups.len() {
            train.extend(&Dataset::new(points, pred.labels)?)?;
        }
    }
    if truth.is_some() && run.aborted.is_none() {
        let accs: Vec<f64> = run.groups.iter().filter_map(|g| g.accuracy).collect();
        run.mean_accuracy = Some(accs.iter().sum::<f64>() / accs.len() as f64);
    }
    Ok(run)
}

/// Runs one of the three protocols with `m` groups. Plain S4VM ignores `m`.
pub fn run_protocol(
    protocol: Protocol,
    labeled: &Dataset,
    unlabeled: &[Vec<f64>],
    truth: Option<&[Label]>,
    m: usize,
    cfg: &S4vmConfig,
) -> Result<SemisupRun> {
    let u = unlabeled.len();
    let plan = match protocol {
        Protocol::S4vm => GroupingPlan::single(u),
        Protocol::SvmS4vm => random_plan(u, m, &mut sample_rng(cfg.seed, u64::MAX))?,
        Protocol::Renewal => {
            let first = s4vm_predict(labeled, unlabeled, cfg)?;
            renewal_plan(&first.decision, m)?
        }
    };
    let mut run = iterative_predict(labeled, unlabeled, truth, &plan, cfg)?;
    run.protocol = Some(protocol);
    Ok(run)
}
