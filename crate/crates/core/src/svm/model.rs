use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::kernel::{FeatureSource, Kernel, KernelRows, RowCache};
use super::smo::{kkt_max_violation, solve_smo, SmoParams, SmoSolution};
use crate::error::{Error, Result};
use crate::label::Label;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    /// KKT tolerance, also the SMO stopping threshold.
    pub tol: f64,
    /// Iteration cap in units of the training-set size.
    pub max_passes: usize,
    /// Kernel row cache budget.
    pub cache_mb: usize,
}

impl SvmParams {
    pub fn rbf(c: f64, gamma: f64) -> Self {
        Self {
            kernel: Kernel::Rbf { gamma },
            c,
            tol: 1e-3,
            max_passes: 1000,
            cache_mb: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("penalty C = {} must be positive", self.c)));
        }
        if !(self.tol > 0.0) || self.max_passes == 0 {
            return Err(Error::InvalidParameter("tolerance and pass limit must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn smo(&self, n: usize) -> SmoParams {
        SmoParams { tol: self.tol, max_iter: self.max_passes.saturating_mul(n.max(1000)) }
    }
}

/// Trained kernel classifier `f(x) = sum_i coef_i K(sv_i, x) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub schema_version: u32,
    pub kernel: Kernel,
    pub c: f64,
    /// Retained input dimensions; support vectors store only these.
    pub feature_mask: Vec<bool>,
    /// Positions of the support vectors in the training set.
    pub support_indices: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i y_i` per support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn full_mask(dim: usize) -> Vec<bool> {
    vec![true; dim]
}

pub fn apply_mask(x: &[f64], mask: &[bool]) -> Vec<f64> {
    x.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| *v).collect()
}

impl SvmModel {
    pub(crate) fn from_solution(
        params: &SvmParams,
        mask: Vec<bool>,
        masked_points: &[Vec<f64>],
        y: &[f64],
        sol: &SmoSolution,
    ) -> Self {
        let support_indices: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            kernel: params.kernel,
            c: params.c,
            feature_mask: mask,
            support_vectors: support_indices.iter().map(|&i| masked_points[i].clone()).collect(),
            coefficients: support_indices.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
            support_indices,
            bias: sol.bias,
            dual_objective: sol.dual_objective,
            iterations: sol.iterations,
            converged: sol.converged,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_mask.len()
    }

    /// Decision value on an already masked vector.
    pub fn decision_masked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(self.decision_masked(&apply_mask(x, &self.feature_mask)))
    }

    pub fn decision_values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.decision_value(x)).collect()
    }

    /// Sign of the decision value; zero maps to `Positive`.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_decision(self.decision_value(x)?))
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("accuracy of an empty dataset".into()));
        }
        let f = self.decision_values(data.features())?;
        let hits = f.iter().zip(data.labels()).filter(|(v, l)| Label::from_decision(**v) == **l).count();
        Ok(hits as f64 / data.len() as f64)
    }

    /// `|w|^2` in feature space; `f(x) / |w|` is the geometric distance.
    pub fn weight_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for (a, ca) in self.support_vectors.iter().zip(&self.coefficients) {
            for (b, cb) in self.support_vectors.iter().zip(&self.coefficients) {
                s += ca * cb * self.kernel.eval(a, b);
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let version = v.get("schema_version").and_then(|x| x.as_u64());
        if version != Some(MODEL_SCHEMA_VERSION as u64) {
            return Err(Error::Schema(format!(
                "model schema version {version:?}, expected {MODEL_SCHEMA_VERSION}"
            )));
        }
        Ok(serde_json::from_value(v)?)
    }
}

pub fn train(data: &Dataset, c: f64, gamma: f64, tol: f64) -> Result<SvmModel> {
    train_with(data, &SvmParams { tol, ..SvmParams::rbf(c, gamma) }, None)
}

pub fn train_with(data: &Dataset, params: &SvmParams, mask: Option<&[bool]>) -> Result<SvmModel> {
    data.require_both_classes()?;
    let cost = vec![params.c; data.len()];
    Ok(train_weighted(data.features(), &data.signs(), &cost, params, mask, None)?.0)
}

/// Training with one box bound per sample. Returns the model and the raw
/// solver state for warm starts and audits.
pub fn train_weighted(
    points: &[Vec<f64>],
    y: &[f64],
    cost: &[f64],
    params: &SvmParams,
    mask: Option<&[bool]>,
    warm: Option<&[f64]>,
) -> Result<(SvmModel, SmoSolution)> {
    params.validate()?;
    let dim = points.first().map_or(0, Vec::len);
    let mask = match mask {
        Some(m) if m.len() != dim => return Err(Error::DimensionMismatch { expected: dim, got: m.len() }),
        Some(m) => m.to_vec(),
        None => full_mask(dim),
    };
    let masked: Vec<Vec<f64>> = points.iter().map(|p| apply_mask(p, &mask)).collect();
    let mut rows = RowCache::with_budget_mb(FeatureSource { points: masked, kernel: params.kernel }, params.cache_mb);
    let sol = solve_smo(&mut rows, y, cost, &params.smo(y.len()), warm)?;
    let model = SvmModel::from_solution(params, mask, &rows.source().points, y, &sol);
    Ok((model, sol))
}

/// Training on an arbitrary row provider whose local indices match
/// `masked_points`.
pub fn train_on_rows<R: KernelRows>(
    rows: &mut R,
    masked_points: &[Vec<f64>],
    mask: Vec<bool>,
    y: &[f64],
    cost: &[f64],
    params: &SvmParams,
    warm: Option<&[f64]>,
) -> Result<(SvmModel, SmoSolution)> {
    params.validate()?;
    let sol = solve_smo(rows, y, cost, &params.smo(y.len()), warm)?;
    Ok((SvmModel::from_solution(params, mask, masked_points, y, &sol), sol))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktAudit {
    pub max_violation: f64,
    pub dual_balance: f64,
    pub passed: bool,
}

/// Checks the soft-margin KKT conditions of `model` on the data it was
/// trained on, with bound `C` for every sample.
pub fn kkt_audit(model: &SvmModel, data: &Dataset, tol: f64) -> Result<KktAudit> {
    let cost = vec![model.c; data.len()];
    kkt_audit_weighted(model, data.features(), &data.signs(), &cost, tol)
}

pub fn kkt_audit_weighted(model: &SvmModel, points: &[Vec<f64>], y: &[f64], cost: &[f64], tol: f64) -> Result<KktAudit> {
    let mut alpha = vec![0.0; y.len()];
    for (&i, &coef) in model.support_indices.iter().zip(&model.coefficients) {
        *alpha.get_mut(i).ok_or(Error::DimensionMismatch { expected: y.len(), got: i + 1 })? = coef * y[i];
    }
    let f = model.decision_values(points)?;
    let max_violation = kkt_max_violation(y, cost, &alpha, &f);
    let dual_balance = model.coefficients.iter().sum::<f64>();
    let passed = max_violation <= tol && dual_balance.abs() <= 1e-8 * model.c.max(1.0);
    Ok(KktAudit { max_violation, dual_balance, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xor() -> Dataset {
        Dataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![Label::Positive, Label::Positive, Label::Negative, Label::Negative],
        )
        .unwrap()
    }

    fn blobs(seed: u64, n: usize, dim: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ls = Vec::new();
        for i in 0..n {
            let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
            let centre = label.sign() * 0.8;
            xs.push((0..dim).map(|d| if d == 0 { centre } else { 0.0 } + rng.gen_range(-1.0..1.0)).collect());
            ls.push(label);
        }
        Dataset::new(xs, ls).unwrap()
    }

    #[test]
    fn symmetric_pair_in_one_dimension() {
        let data = Dataset::new(vec![vec![1.0], vec![-1.0]], vec![Label::Positive, Label::Negative]).unwrap();
        let m = train(&data, 10.0, 0.5, 1e-3).unwrap();
        assert_eq!(m.support_indices, vec![0, 1]);
        assert!(m.bias.abs() < 1e-12);
        assert_eq!(m.predict(&[1.0]).unwrap(), Label::Positive);
        assert_eq!(m.predict(&[-1.0]).unwrap(), Label::Negative);
        assert!(m.decision_value(&[0.0]).unwrap().abs() < 1e-8);
    }

    #[test]
    fn xor_is_fit_exactly() {
        let data = xor();
        let m = train(&data, 10.0, 1.0, 1e-3).unwrap();
        assert_eq!(m.accuracy(&data).unwrap(), 1.0);
        assert!(kkt_audit(&m, &data, 1e-3).unwrap().passed);
    }

    #[test]
    fn free_support_vectors_sit_on_the_margin() {
        let data = blobs(3, 60, 3);
        let m = train(&data, 1.0, 0.5, 1e-3).unwrap();
        for (&i, &coef) in m.support_indices.iter().zip(&m.coefficients) {
            if coef.abs() < m.c {
                let margin = data.labels()[i].sign() * m.decision_value(&data.features()[i]).unwrap();
                assert!((margin - 1.0).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn decision_matches_direct_kernel_sum() {
        let data = blobs(4, 50, 4);
        let m = train(&data, 2.0, 0.3, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..10 {
            let probe: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut direct = m.bias;
            for (&i, &coef) in m.support_indices.iter().zip(&m.coefficients) {
                let d2: f64 = data.features()[i].iter().zip(&probe).map(|(a, b)| (a - b).powi(2)).sum();
                direct += coef * (-0.3 * d2).exp();
            }
            assert!((m.decision_value(&probe).unwrap() - direct).abs() <= 1e-12);
        }
        assert!(m.decision_value(&[0.0; 3]).is_err());
    }

    #[test]
    fn duplicating_samples_keeps_decisions() {
        let data = blobs(5, 40, 2);
        let mut doubled = data.clone();
        doubled.extend(&data).unwrap();
        // each duplicated pair shares the box of one sample with bound 2C
        let reference = train(&data, 6.0, 0.7, 1e-11).unwrap();
        let dup = train(&doubled, 3.0, 0.7, 1e-11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..20 {
            let probe: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = reference.decision_value(&probe).unwrap();
            let b = dup.decision_value(&probe).unwrap();
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn sample_order_does_not_matter() {
        let data = blobs(6, 50, 3);
        let mut perm: Vec<usize> = (0..50).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(60));
        let a = train(&data, 1.5, 0.4, 1e-11).unwrap();
        let b = train(&data.subset(&perm), 1.5, 0.4, 1e-11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..20 {
            let probe: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert!((a.decision_value(&probe).unwrap() - b.decision_value(&probe).unwrap()).abs() <= 1e-8);
        }
    }

    #[test]
    fn constant_feature_changes_nothing() {
        let data = blobs(7, 40, 3);
        let padded = data.with_extra_feature(|_| 1.0);
        let a = train(&data, 2.0, 0.5, 1e-3).unwrap();
        let b = train(&padded, 2.0, 0.5, 1e-3).unwrap();
        for x in data.features() {
            let mut px = x.clone();
            px.push(1.0);
            assert!((a.decision_value(x).unwrap() - b.decision_value(&px).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn mask_restricts_kernel() {
        let data = blobs(8, 40, 3);
        let mask = vec![true, false, true];
        let m = train_with(&data, &SvmParams::rbf(1.0, 0.5), Some(&mask)).unwrap();
        assert!(m.support_vectors.iter().all(|v| v.len() == 2));
        let mut x = data.features()[0].clone();
        let before = m.decision_value(&x).unwrap();
        x[1] += 100.0;
        assert_eq!(before, m.decision_value(&x).unwrap());
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let m = train(&xor(), 10.0, 1.0, 1e-3).unwrap();
        let s = m.to_json().unwrap();
        assert_eq!(SvmModel::from_json(&s).unwrap(), m);
        let bumped = s.replace("\"schema_version\":1", "\"schema_version\":99");
        assert!(matches!(SvmModel::from_json(&bumped), Err(Error::Schema(_))));
    }

    #[test]
    fn single_class_is_rejected() {
        let data = Dataset::new(vec![vec![0.0], vec![1.0]], vec![Label::Positive; 2]).unwrap();
        assert!(matches!(train(&data, 1.0, 1.0, 1e-3), Err(Error::SingleClass)));
    }
}
