//! Minimax label choice against a set of plausible labelings.
//!
//! For a labeling `y` and a candidate `c`, the gain over the baseline `b` is
//! `(y - b)^T c / (2u)`: the accuracy difference between `y` and `b` if `c`
//! were the truth. The safe labeling maximizes the worst gain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeAssignment {
    pub labels: Vec<Label>,
    /// Worst-case gain of `labels` over the baseline.
    pub value: f64,
    /// Optimum of the continuous relaxation, an upper bound on `value`.
    pub relaxed_value: f64,
    /// `relaxed_value - value`.
    pub slack: f64,
}

fn signs(labels: &[Label]) -> Vec<f64> {
    labels.iter().map(|l| l.sign()).collect()
}

/// Worst-case gain of `labels` over `baseline` across `candidates`.
pub fn minimax_value(labels: &[Label], candidates: &[Vec<Label>], baseline: &[Label]) -> f64 {
    let u = labels.len() as f64;
    candidates
        .iter()
        .map(|c| {
            labels
                .iter()
                .zip(baseline)
                .zip(c)
                .map(|((y, b), c)| (y.sign() - b.sign()) * c.sign())
                .sum::<f64>()
                / (2.0 * u)
        })
        .fold(f64::INFINITY, f64::min)
}

const SUBGRADIENT_STEPS: usize = 400;

pub fn safe_assign(candidates: &[Vec<Label>], baseline: &[Label]) -> Result<SafeAssignment> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("safe assignment needs at least one candidate".into()));
    }
    let u = baseline.len();
    if let Some(c) = candidates.iter().find(|c| c.len() != u) {
        return Err(Error::DimensionMismatch { expected: u, got: c.len() });
    }
    if u == 0 {
        return Ok(SafeAssignment { labels: Vec::new(), value: 0.0, relaxed_value: 0.0, slack: 0.0 });
    }
    let cand: Vec<Vec<f64>> = candidates.iter().map(|c| signs(c)).collect();
    let base = signs(baseline);
    let gains = |z: &[f64]| -> Vec<f64> {
        cand.iter()
            .map(|c| z.iter().zip(&base).zip(c).map(|((z, b), c)| (z - b) * c).sum::<f64>() / (2.0 * u as f64))
            .collect()
    };

    // projected subgradient ascent on the relaxation over [-1, 1]^u
    let mut z = base.clone();
    let mut best_z = z.clone();
    let mut best = 0.0f64;
    for k in 0..SUBGRADIENT_STEPS {
        let g = gains(&z);
        let (worst, &val) = g
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("candidates are non-empty");
        if val > best {
            best = val;
            best_z.clone_from(&z);
        }
        let step = 1.0 / ((k + 1) as f64).sqrt();
        for (zj, cj) in z.iter_mut().zip(&cand[worst]) {
            *zj = (*zj + step * cj).clamp(-1.0, 1.0);
        }
    }
    let relaxed_value = best.max(gains(&z).into_iter().fold(f64::INFINITY, f64::min));

    let mut y: Vec<f64> = best_z
        .iter()
        .zip(&base)
        .map(|(&z, &b)| if z > 0.0 { 1.0 } else if z < 0.0 { -1.0 } else { b })
        .collect();
    improve_by_flips(&mut y, &cand, &base);

    let mut labels: Vec<Label> = y.iter().map(|&v| Label::from_decision(v)).collect();
    let mut value = minimax_value(&labels, candidates, baseline);
    if value < 0.0 {
        labels = baseline.to_vec();
        value = 0.0;
    }
    let relaxed_value = relaxed_value.max(value);
    Ok(SafeAssignment { labels, value, relaxed_value, slack: relaxed_value - value })
}

/// Single-coordinate ascent on `(worst gain, total gain)` in lexicographic
/// order. Integer arithmetic on `(y - b)^T c` keeps comparisons exact.
fn improve_by_flips(y: &mut [f64], cand: &[Vec<f64>], base: &[f64]) {
    let mut g: Vec<i64> = cand
        .iter()
        .map(|c| y.iter().zip(base).zip(c).map(|((y, b), c)| ((y - b) * c) as i64).sum())
        .collect();
    let score = |g: &[i64]| (*g.iter().min().expect("non-empty"), g.iter().sum::<i64>());
    loop {
        let current = score(&g);
        let mut best: Option<(usize, (i64, i64))> = None;
        for j in 0..y.len() {
            let trial: Vec<i64> = g
                .iter()
                .zip(cand)
                .map(|(gt, c)| gt - 2 * (y[j] * c[j]) as i64)
                .collect();
            let s = score(&trial);
            if s > current && best.map_or(true, |(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let Some((j, _)) = best else { break };
        for (gt, c) in g.iter_mut().zip(cand) {
            *gt -= 2 * (y[j] * c[j]) as i64;
        }
        y[j] = -y[j];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lab(v: &[i8]) -> Vec<Label> {
        v.iter().map(|&x| Label::try_from(x).unwrap()).collect()
    }

    fn brute_force(candidates: &[Vec<Label>], baseline: &[Label]) -> f64 {
        let u = baseline.len();
        (0..1u32 << u)
            .map(|code| {
                let y: Vec<Label> = (0..u)
                    .map(|j| if code >> j & 1 == 1 { Label::Positive } else { Label::Negative })
                    .collect();
                minimax_value(&y, candidates, baseline)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn single_candidate_is_adopted() {
        let c = lab(&[1, -1, -1, 1, 1]);
        let b = lab(&[1, 1, -1, -1, 1]);
        let s = safe_assign(&[c.clone()], &b).unwrap();
        assert_eq!(s.labels, c);
        assert!((s.value - 0.4).abs() < 1e-12);
    }

    #[test]
    fn candidates_equal_to_baseline() {
        let b = lab(&[1, -1, 1, -1]);
        let s = safe_assign(&[b.clone(), b.clone()], &b).unwrap();
        assert_eq!(s.labels, b);
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn complementary_pair_on_four_points() {
        let c1 = lab(&[1, 1, -1, -1]);
        let c2 = lab(&[-1, -1, 1, 1]);
        let b = lab(&[1, -1, 1, -1]);
        let s = safe_assign(&[c1.clone(), c2.clone()], &b).unwrap();
        assert_eq!(s.value, brute_force(&[c1, c2], &b));
    }

    #[test]
    fn empty_candidates_rejected() {
        assert!(safe_assign(&[], &lab(&[1])).is_err());
        assert!(safe_assign(&[lab(&[1, 1])], &lab(&[1])).is_err());
    }

    #[test]
    fn matches_exhaustive_search_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..60 {
            let u = rng.gen_range(1..=12);
            let t = rng.gen_range(1..=5);
            let truth: Vec<i8> = (0..u).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
            // candidates and baseline are noisy copies of a common labeling
            let noisy = |rng: &mut ChaCha8Rng, p: f64| -> Vec<Label> {
                lab(&truth.iter().map(|&v| if rng.gen_bool(p) { -v } else { v }).collect::<Vec<_>>())
            };
            let cands: Vec<Vec<Label>> = (0..t).map(|_| noisy(&mut rng, 0.3)).collect();
            let base = noisy(&mut rng, 0.3);
            let s = safe_assign(&cands, &base).unwrap();
            let exact = brute_force(&cands, &base);
            assert!((s.value - exact).abs() < 1e-12, "case {case}: {} vs {exact}", s.value);
            assert!(s.value >= 0.0 && s.slack >= -1e-12);
        }
    }
}
