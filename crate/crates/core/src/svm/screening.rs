use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{CvContext, TrainConfig};
use super::dataset::{stratified_split, Dataset};
use super::model::train_with;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureGain {
    pub feature: usize,
    /// Cross-validated accuracy with the feature removed minus the
    /// full-feature accuracy.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub mask: Vec<bool>,
    /// Removed features in the order they were accepted.
    pub dropped: Vec<usize>,
    pub cv_before: f64,
    pub cv_after: f64,
    /// Drop-one gains against the full feature set, best first.
    pub ranking: Vec<FeatureGain>,
    pub c: f64,
    pub gamma: f64,
}

/// Traversal search for features whose removal helps.
///
/// Every feature is first scored by the cross-validated accuracy of the
/// model without it. Candidates are then visited best first and each one is
/// re-scored against the current reduced set; it is dropped when that raises
/// accuracy by at least `min_gain`.
pub fn screen_features(data: &Dataset, cfg: &TrainConfig, c: f64, gamma: f64, seed: u64) -> Result<Screening> {
    let ctx = CvContext::new(data, cfg, seed)?;
    let dim = data.dim();
    let cv_before = ctx.accuracy(c, gamma, &[])?;
    let jobs: Vec<(f64, f64, Vec<usize>)> = (0..dim).map(|f| (c, gamma, vec![f])).collect();
    let acc = ctx.accuracies(&jobs)?;
    let mut ranking: Vec<FeatureGain> = acc
        .iter()
        .enumerate()
        .map(|(feature, a)| FeatureGain { feature, gain: a - cv_before })
        .collect();
    // stable sort keeps feature order among ties
    ranking.sort_by(|a, b| b.gain.total_cmp(&a.gain));

    let mut dropped: Vec<usize> = Vec::new();
    let mut current = cv_before;
    for cand in ranking.iter().take_while(|g| g.gain >= cfg.min_gain) {
        if dropped.len() + 1 >= dim {
            break;
        }
        let mut trial = dropped.clone();
        trial.push(cand.feature);
        let a = if dropped.is_empty() { acc[cand.feature] } else { ctx.accuracy(c, gamma, &trial)? };
        if a - current >= cfg.min_gain {
            log::debug!("dropping feature {} ({:.4} -> {:.4})", cand.feature, current, a);
            dropped = trial;
            current = a;
        }
    }
    let mut mask = vec![true; dim];
    for &f in &dropped {
        mask[f] = false;
    }
    Ok(Screening { mask, dropped, cv_before, cv_after: current, ranking, c, gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub retained: usize,
    pub mean: f64,
    pub std: f64,
}

/// Held-out accuracy as features are removed along `order`, one point per
/// retained count from the full set down to `dim - max_removed`. Each seed
/// draws its own stratified split with `train_fraction` for training.
pub fn accuracy_vs_feature_count(
    data: &Dataset,
    cfg: &TrainConfig,
    c: f64,
    gamma: f64,
    order: &[usize],
    max_removed: usize,
    train_fraction: f64,
    seeds: &[u64],
) -> Result<Vec<CurvePoint>> {
    if seeds.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 repetitions".into()));
    }
    let dim = data.dim();
    let steps = max_removed.min(order.len()).min(dim.saturating_sub(1));
    let splits: Vec<(Dataset, Dataset)> = seeds
        .iter()
        .map(|&s| {
            let (tr, te) = stratified_split(data.labels(), train_fraction, &mut ChaCha8Rng::seed_from_u64(s))?;
            Ok((data.subset(&tr), data.subset(&te)))
        })
        .collect::<Result<_>>()?;
    let params = cfg.params(c, gamma);
    let acc: Vec<f64> = (0..(steps + 1) * seeds.len())
        .into_par_iter()
        .map(|t| {
            let (r, s) = (t / seeds.len(), t % seeds.len());
            let mut mask = vec![true; dim];
            for &f in &order[..r] {
                mask[f] = false;
            }
            let (train, test) = &splits[s];
            train_with(train, &params, Some(&mask))?.accuracy(test)
        })
        .collect::<Result<_>>()?;
    Ok(acc
        .chunks(seeds.len())
        .enumerate()
        .map(|(r, a)| {
            let n = a.len() as f64;
            let mean = a.iter().sum::<f64>() / n;
            let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            CurvePoint { retained: dim - r, mean, std: var.sqrt() }
        })
        .collect())
}
