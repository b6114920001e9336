//! Candidate low-density separators.
//!
//! Each restart alternates between fitting the SVM to the current labels of
//! the unlabeled points (bound `C2` on those, `C1` on the labeled ones) and
//! annealing the labels against the fixed fit. The restarts are then thinned
//! so that no two kept labelings overlap by `1 - diversity` or more.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::states::sample_rng;
use crate::svm::kernel::{DenseGram, FeatureSource, Kernel};
use crate::svm::model::{full_mask, SvmModel, SvmParams};
use crate::svm::smo::{solve_smo, SmoSolution};
use crate::svm::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S4vmConfig {
    /// Maximum number of kept separators.
    pub candidates: usize,
    pub c_labeled: f64,
    pub c_unlabeled: f64,
    pub gamma: f64,
    /// Two labelings conflict when their normalized overlap reaches
    /// `1 - diversity`.
    pub diversity: f64,
    /// Objective penalty per conflict when thinning.
    pub diversity_penalty: f64,
    /// Allowed fraction of positives among the unlabeled; `None` means the
    /// labeled fraction plus or minus 0.1.
    pub balance: Option<[f64; 2]>,
    pub restarts: usize,
    /// Fraction of uphill moves accepted at the starting temperature.
    pub initial_acceptance: f64,
    pub cooling: f64,
    /// Annealing sweeps per label update, `u` proposals each.
    pub sweeps: usize,
    /// Maximum fit / anneal alternations per restart.
    pub alternations: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for S4vmConfig {
    fn default() -> Self {
        Self {
            candidates: 10,
            c_labeled: 100.0,
            c_unlabeled: 0.1,
            gamma: 10f64.powf(-1.8),
            diversity: 0.5,
            diversity_penalty: 1e6,
            balance: None,
            restarts: 20,
            initial_acceptance: 0.5,
            cooling: 0.95,
            sweeps: 40,
            alternations: 6,
            tol: 1e-3,
            seed: 0,
        }
    }
}

impl S4vmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.candidates < 2 {
            return bad("need at least 2 candidate separators");
        }
        if !(self.c_labeled > 0.0 && self.c_unlabeled > 0.0) {
            return bad("penalties must be positive");
        }
        Kernel::rbf(self.gamma)?;
        if !(self.diversity > 0.0 && self.diversity < 1.0) {
            return bad("diversity threshold must lie in (0, 1)");
        }
        if self.diversity_penalty <= self.c_labeled {
            return bad("diversity penalty must dominate the labeled penalty");
        }
        if let Some([lo, hi]) = self.balance {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return bad("balance band must be an interval inside (0, 1)");
            }
        }
        if self.restarts == 0 || self.sweeps == 0 || self.alternations == 0 {
            return bad("restarts, sweeps and alternations must be positive");
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) || !(self.initial_acceptance > 0.0 && self.initial_acceptance < 1.0) {
            return bad("cooling and initial acceptance must lie in (0, 1)");
        }
        if !(self.tol > 0.0) {
            return bad("tolerance must be positive");
        }
        Ok(())
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams { tol: self.tol, ..SvmParams::rbf(self.c_labeled, self.gamma) }
    }

    /// Positive-count limits for `u` unlabeled points.
    pub fn band_counts(&self, labeled_positive_fraction: f64, u: usize) -> (usize, usize) {
        let [lo, hi] = self
            .balance
            .unwrap_or([labeled_positive_fraction - 0.1, labeled_positive_fraction + 0.1]);
        let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
        let lo_n = (lo * u as f64 - 1e-9).ceil().max(0.0) as usize;
        let hi_n = ((hi * u as f64 + 1e-9).floor() as usize).min(u);
        if lo_n > hi_n {
            let mid = ((lo + hi) / 2.0 * u as f64).round() as usize;
            (mid, mid)
        } else {
            (lo_n, hi_n)
        }
    }
}

fn hinge(margin: f64) -> f64 {
    (1.0 - margin).max(0.0)
}

/// `1/2 |w|^2 + C1 sum hinge(labeled) + C2 sum hinge(unlabeled vs y_hat)`
/// for a fixed model.
pub fn s3vm_objective(
    labeled: &Dataset,
    unlabeled: &[Vec<f64>],
    y_hat: &[Label],
    model: &SvmModel,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if y_hat.len() != unlabeled.len() {
        return Err(Error::DimensionMismatch { expected: unlabeled.len(), got: y_hat.len() });
    }
    let fl = model.decision_values(labeled.features())?;
    let fu = model.decision_values(unlabeled)?;
    let lab: f64 = fl.iter().zip(labeled.labels()).map(|(f, l)| hinge(l.sign() * f)).sum();
    let unl: f64 = fu.iter().zip(y_hat).map(|(f, l)| hinge(l.sign() * f)).sum();
    Ok(0.5 * model.weight_norm_sq() + c1 * lab + c2 * unl)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSeparator {
    pub labels: Vec<Label>,
    pub objective: f64,
    pub model: SvmModel,
    /// Decision values on the unlabeled points.
    pub decision: Vec<f64>,
    pub restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Kept separators, lowest objective first.
    pub candidates: Vec<CandidateSeparator>,
    /// Fewer than two mutually diverse separators could be found.
    pub collapsed: bool,
    /// Predictions of the SVM trained on the labeled points alone.
    pub baseline_labels: Vec<Label>,
    pub baseline_decision: Vec<f64>,
    /// Inclusive limits on the number of positives among the unlabeled.
    pub band: (usize, usize),
}

/// Normalized agreement `a^T b / u` of two labelings.
pub fn overlap(a: &[Label], b: &[Label]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.sign() * y.sign()).sum::<f64>() / a.len().max(1) as f64
}

struct Fit {
    model: SvmModel,
    decision: Vec<f64>,
    objective: f64,
}

struct Problem<'a> {
    cfg: &'a S4vmConfig,
    gram: DenseGram,
    points: Vec<Vec<f64>>,
    l: usize,
    u: usize,
    y_l: Vec<f64>,
    cost: Vec<f64>,
    band: (usize, usize),
}

impl Problem<'_> {
    fn fit(&self, y_hat: &[f64]) -> Result<Fit> {
        let y: Vec<f64> = self.y_l.iter().chain(y_hat).copied().collect();
        let mut rows = self.gram.clone();
        let params = self.cfg.svm_params();
        let sol = solve_smo(&mut rows, &y, &self.cost, &params.smo(y.len()), None)?;
        let decision = self.decision(&sol, &y, 0..self.l + self.u);
        let w2: f64 = (0..y.len()).map(|s| sol.alpha[s] * y[s] * (decision[s] - sol.bias)).sum();
        let hinge_sum: f64 = (0..y.len()).map(|i| self.cost[i] * hinge(y[i] * decision[i])).sum();
        let model = SvmModel::from_solution(&params, full_mask(self.points[0].len()), &self.points, &y, &sol);
        Ok(Fit { model, decision, objective: 0.5 * w2 + hinge_sum })
    }

    fn decision(&self, sol: &SmoSolution, y: &[f64], rows: std::ops::Range<usize>) -> Vec<f64> {
        let sv: Vec<usize> = (0..sol.alpha.len()).filter(|&s| sol.alpha[s] > 0.0).collect();
        rows.map(|i| sv.iter().map(|&s| sol.alpha[s] * y[s] * self.gram.get(i, s)).sum::<f64>() + sol.bias)
            .collect()
    }

    fn in_band(&self, positives: usize) -> bool {
        (self.band.0..=self.band.1).contains(&positives)
    }

    /// Flips the labels nearest the other class until the positive count
    /// is inside the band.
    fn project(&self, y: &mut [f64], score: &[f64]) {
        let mut pos = y.iter().filter(|&&v| v > 0.0).count();
        if pos < self.band.0 {
            let mut neg: Vec<usize> = (0..y.len()).filter(|&j| y[j] < 0.0).collect();
            neg.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
            for j in neg.into_iter().take(self.band.0 - pos) {
                y[j] = 1.0;
            }
        } else if pos > self.band.1 {
            let mut p: Vec<usize> = (0..y.len()).filter(|&j| y[j] > 0.0).collect();
            p.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
            for j in p.into_iter().take(pos - self.band.1) {
                y[j] = -1.0;
            }
        }
        pos = y.iter().filter(|&&v| v > 0.0).count();
        debug_assert!(self.in_band(pos));
    }

    /// Simulated annealing of the unlabeled hinge term with the decision
    /// values `f` held fixed. Moves are single flips that respect the band
    /// and swaps of one positive with one negative.
    fn anneal<R: Rng>(&self, start: &[f64], f: &[f64], rng: &mut R) -> Vec<f64> {
        let c2 = self.cfg.c_unlabeled;
        let u = start.len();
        let flip_cost = |y: &[f64], j: usize| c2 * (hinge(-y[j] * f[j]) - hinge(y[j] * f[j]));
        let energy = |y: &[f64]| (0..u).map(|j| c2 * hinge(y[j] * f[j])).sum::<f64>();

        let uphill: Vec<f64> = (0..u).map(|j| flip_cost(start, j)).filter(|&d| d > 0.0).collect();
        let mut temp = if uphill.is_empty() {
            1e-12
        } else {
            uphill.iter().sum::<f64>() / uphill.len() as f64 / (1.0 / self.cfg.initial_acceptance).ln()
        };

        let mut y = start.to_vec();
        let mut e = energy(&y);
        let mut pos = y.iter().filter(|&&v| v > 0.0).count();
        let mut best = y.clone();
        let mut best_e = e;
        let accept = |d: f64, t: f64, rng: &mut R| d <= 0.0 || rng.gen::<f64>() < (-d / t).exp();
        for _ in 0..self.cfg.sweeps {
            for _ in 0..u {
                let j = rng.gen_range(0..u);
                if rng.gen_bool(0.5) {
                    let new_pos = if y[j] > 0.0 { pos - 1 } else { pos + 1 };
                    if !self.in_band(new_pos) {
                        continue;
                    }
                    let d = flip_cost(&y, j);
                    if accept(d, temp, rng) {
                        y[j] = -y[j];
                        pos = new_pos;
                        e += d;
                    }
                } else {
                    let Some(k) = (0..20).map(|_| rng.gen_range(0..u)).find(|&k| y[k] != y[j]) else {
                        continue;
                    };
                    let d = flip_cost(&y, j) + flip_cost(&y, k);
                    if accept(d, temp, rng) {
                        y[j] = -y[j];
                        y[k] = -y[k];
                        e += d;
                    }
                }
            }
            if e < best_e {
                best.clone_from(&y);
                best_e = e;
            }
            temp *= self.cfg.cooling;
        }
        // finish at a local minimum of single flips
        let mut pos = best.iter().filter(|&&v| v > 0.0).count();
        loop {
            let mut improved = false;
            for j in 0..u {
                let new_pos = if best[j] > 0.0 { pos - 1 } else { pos + 1 };
                if self.in_band(new_pos) && flip_cost(&best, j) < 0.0 {
                    best[j] = -best[j];
                    pos = new_pos;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        best
    }

    fn local_search(&self, start: Vec<f64>, restart: usize, rng: &mut impl Rng) -> Result<CandidateSeparator> {
        let mut y_hat = start;
        let mut fit = self.fit(&y_hat)?;
        for _ in 1..self.cfg.alternations {
            let next = self.anneal(&y_hat, &fit.decision[self.l..], rng);
            if next == y_hat {
                break;
            }
            let next_fit = self.fit(&next)?;
            if next_fit.objective >= fit.objective {
                break;
            }
            y_hat = next;
            fit = next_fit;
        }
        Ok(CandidateSeparator {
            labels: y_hat.iter().map(|&v| Label::from_decision(v)).collect(),
            objective: fit.objective,
            model: fit.model,
            decision: fit.decision[self.l..].to_vec(),
            restart,
        })
    }
}

fn label_propagation(gram: &DenseGram, y_l: &[f64], u: usize) -> Vec<f64> {
    let l = y_l.len();
    let n = l + u;
    let mut score: Vec<f64> = y_l.iter().copied().chain(std::iter::repeat(0.0).take(u)).collect();
    for _ in 0..30 {
        let next: Vec<f64> = (l..n)
            .map(|j| {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    if i != j {
                        let k = gram.get(j, i);
                        num += k * score[i];
                        den += k;
                    }
                }
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            })
            .collect();
        score[l..].copy_from_slice(&next);
    }
    score[l..].to_vec()
}

pub fn generate_candidates(labeled: &Dataset, unlabeled: &[Vec<f64>], cfg: &S4vmConfig) -> Result<CandidateSet> {
    cfg.validate()?;
    labeled.require_both_classes()?;
    if unlabeled.is_empty() {
        return Err(Error::InvalidParameter("no unlabeled points".into()));
    }
    if let Some(x) = unlabeled.iter().find(|x| x.len() != labeled.dim()) {
        return Err(Error::DimensionMismatch { expected: labeled.dim(), got: x.len() });
    }
    let (l, u) = (labeled.len(), unlabeled.len());
    let points: Vec<Vec<f64>> = labeled.features().iter().chain(unlabeled).cloned().collect();
    let gram = DenseGram::from_source(&FeatureSource { points: points.clone(), kernel: Kernel::Rbf { gamma: cfg.gamma } });
    let mut cost = vec![cfg.c_labeled; l];
    cost.extend(std::iter::repeat(cfg.c_unlabeled).take(u));
    let prob = Problem {
        cfg,
        band: cfg.band_counts(labeled.positive_fraction(), u),
        y_l: labeled.signs(),
        gram,
        points,
        l,
        u,
        cost,
    };

    // the labeled-only SVM
    let params = cfg.svm_params();
    let mut lab_rows = prob.gram.restrict(&(0..l).collect::<Vec<_>>());
    let base_sol = solve_smo(&mut lab_rows, &prob.y_l, &vec![cfg.c_labeled; l], &params.smo(l), None)?;
    let baseline_decision: Vec<f64> = (l..l + u)
        .map(|j| (0..l).map(|s| base_sol.alpha[s] * prob.y_l[s] * prob.gram.get(j, s)).sum::<f64>() + base_sol.bias)
        .collect();
    let baseline_labels: Vec<Label> = baseline_decision.iter().map(|&f| Label::from_decision(f)).collect();
    let propagated = label_propagation(&prob.gram, &prob.y_l, u);

    let starts: Vec<Vec<f64>> = (0..cfg.restarts)
        .map(|r| {
            let mut rng = sample_rng(cfg.seed, r as u64);
            let (mut y, score): (Vec<f64>, &[f64]) = match r {
                0 => (baseline_labels.iter().map(|l| l.sign()).collect(), &baseline_decision),
                1 => (propagated.iter().map(|&s| if s >= 0.0 { 1.0 } else { -1.0 }).collect(), &propagated),
                _ => {
                    let npos = rng.gen_range(prob.band.0..=prob.band.1);
                    let mut y = vec![-1.0; u];
                    for j in rand::seq::index::sample(&mut rng, u, npos) {
                        y[j] = 1.0;
                    }
                    (y, &baseline_decision)
                }
            };
            prob.project(&mut y, score);
            y
        })
        .collect();

    let mut found: Vec<CandidateSeparator> = starts
        .into_par_iter()
        .enumerate()
        .map(|(r, y)| {
            let mut rng = sample_rng(cfg.seed, (cfg.restarts + r) as u64);
            prob.local_search(y, r, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut kept = thin(&mut found, cfg);

    if kept.len() < 2 {
        // pad with perturbed copies of the best labeling
        let best: Vec<f64> = kept[0].labels.iter().map(|l| l.sign()).collect();
        let extra: Vec<CandidateSeparator> = (0..cfg.restarts.div_ceil(2).max(2))
            .into_par_iter()
            .map(|p| {
                let r = cfg.restarts + p;
                let mut rng = sample_rng(cfg.seed, (2 * cfg.restarts + p) as u64);
                let mut y = best.clone();
                let mut pos: Vec<usize> = (0..u).filter(|&j| y[j] > 0.0).collect();
                let mut neg: Vec<usize> = (0..u).filter(|&j| y[j] < 0.0).collect();
                pos.shuffle(&mut rng);
                neg.shuffle(&mut rng);
                let swaps = pos.len().min(neg.len()) * 2 / 5;
                for (&a, &b) in pos.iter().zip(&neg).take(swaps) {
                    y[a] = -1.0;
                    y[b] = 1.0;
                }
                prob.local_search(y, r, &mut rng)
            })
            .collect::<Result<_>>()?;
        found = kept;
        found.extend(extra);
        kept = thin(&mut found, cfg);
    }
    let collapsed = kept.len() < 2;
    if collapsed {
        log::debug!("candidate search collapsed to a single separator");
    }
    Ok(CandidateSet { candidates: kept, collapsed, baseline_labels, baseline_decision, band: prob.band })
}

/// Repeatedly takes the labeling with the lowest objective plus
/// `diversity_penalty` per conflict with those already taken, until only
/// conflicting ones remain or `candidates` are taken.
fn thin(found: &mut Vec<CandidateSeparator>, cfg: &S4vmConfig) -> Vec<CandidateSeparator> {
    found.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(a.restart.cmp(&b.restart)));
    let mut kept: Vec<CandidateSeparator> = Vec::new();
    let mut pool: Vec<CandidateSeparator> = std::mem::take(found);
    while kept.len() < cfg.candidates && !pool.is_empty() {
        let penalized = |c: &CandidateSeparator| {
            let conflicts = kept.iter().filter(|k| overlap(&k.labels, &c.labels) >= 1.0 - cfg.diversity).count();
            c.objective + cfg.diversity_penalty * conflicts as f64
        };
        let (pick, score) = pool
            .iter()
            .enumerate()
            .map(|(i, c)| (i, penalized(c)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("pool is non-empty");
        if !kept.is_empty() && score >= cfg.diversity_penalty {
            break;
        }
        kept.push(pool.remove(pick));
    }
    kept
}
