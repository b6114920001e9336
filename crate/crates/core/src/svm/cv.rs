use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{stratified_folds, Dataset};
use super::kernel::{DistanceSource, FeatureSource, Kernel, RowCache, SquaredDistances};
use super::model::{apply_mask, SvmParams};
use super::smo::solve_smo;
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
    Linear,
}

/// `10^lo, ..., 10^hi` with `points` entries.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..points)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub kernel: KernelKind,
    pub c_grid: Vec<f64>,
    /// Ignored for the linear kernel.
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    pub tol: f64,
    pub max_passes: usize,
    pub cache_mb: usize,
    /// Minimum cross-validated accuracy gain for dropping a feature.
    pub min_gain: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Rbf,
            c_grid: log_grid(-2.0, 3.0, 11),
            gamma_grid: log_grid(-4.0, 2.0, 13),
            folds: 5,
            tol: 1e-3,
            max_passes: 1000,
            cache_mb: 256,
            min_gain: 0.001,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() || (self.kernel == KernelKind::Rbf && self.gamma_grid.is_empty()) {
            return Err(Error::InvalidParameter("hyperparameter grids must be non-empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 folds, got {}", self.folds)));
        }
        for &v in self.c_grid.iter().chain(&self.gamma_grid) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("grid value {v} must be positive")));
            }
        }
        if !(self.tol > 0.0) || self.max_passes == 0 || self.min_gain < 0.0 {
            return Err(Error::InvalidParameter("tolerance, pass limit and gain threshold".into()));
        }
        Ok(())
    }

    pub fn params(&self, c: f64, gamma: f64) -> SvmParams {
        let kernel = match self.kernel {
            KernelKind::Rbf => Kernel::Rbf { gamma },
            KernelKind::Linear => Kernel::Linear,
        };
        SvmParams {
            kernel,
            c,
            tol: self.tol,
            max_passes: self.max_passes,
            cache_mb: self.cache_mb,
        }
    }

    fn gammas(&self) -> Vec<f64> {
        match self.kernel {
            KernelKind::Rbf => self.gamma_grid.clone(),
            KernelKind::Linear => vec![f64::NAN],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub c: f64,
    pub gamma: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: CvCell,
    /// Every grid cell, `C` major and `gamma` minor.
    pub cells: Vec<CvCell>,
}

/// Fixed folds plus cached distances, reused across many evaluations.
pub struct CvContext<'a> {
    data: &'a Dataset,
    folds: Vec<Vec<usize>>,
    distances: Option<SquaredDistances>,
    cfg: &'a TrainConfig,
}

impl<'a> CvContext<'a> {
    pub fn new(data: &'a Dataset, cfg: &'a TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        data.require_both_classes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let folds = stratified_folds(data.labels(), cfg.folds, &mut rng)?;
        let distances = (cfg.kernel == KernelKind::Rbf).then(|| SquaredDistances::new(data.features()));
        Ok(Self { data, folds, distances, cfg })
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    /// Number of correctly classified held-out samples in fold `k`.
    fn fold_hits(&self, k: usize, c: f64, gamma: f64, dropped: &[usize]) -> Result<usize> {
        let data = self.data;
        let train: Vec<usize> = (0..self.folds.len())
            .filter(|&f| f != k)
            .flat_map(|f| self.folds[f].iter().copied())
            .collect();
        let y: Vec<f64> = train.iter().map(|&i| data.labels()[i].sign()).collect();
        if !y.contains(&1.0) || !y.contains(&-1.0) {
            return Err(Error::DegenerateFolds(format!("training part of fold {k} has one class")));
        }
        let params = self.cfg.params(c, gamma);
        let cost = vec![c; train.len()];
        let hits = |f: &dyn Fn(usize) -> f64| {
            self.folds[k]
                .iter()
                .filter(|&&v| Label::from_decision(f(v)) == data.labels()[v])
                .count()
        };
        match &self.distances {
            Some(d2) => {
                let src = DistanceSource {
                    distances: d2,
                    points: data.features(),
                    index: train.clone(),
                    gamma,
                    dropped: dropped.to_vec(),
                };
                let mut rows = RowCache::with_budget_mb(src, self.cfg.cache_mb);
                let sol = solve_smo(&mut rows, &y, &cost, &params.smo(y.len()), None)?;
                let src = rows.source();
                let sv: Vec<usize> = (0..train.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
                Ok(hits(&|v| {
                    sv.iter().map(|&i| sol.alpha[i] * y[i] * src.eval_global(train[i], v)).sum::<f64>() + sol.bias
                }))
            }
            None => {
                let mut mask = vec![true; data.dim()];
                for &f in dropped {
                    mask[f] = false;
                }
                let points: Vec<Vec<f64>> = train.iter().map(|&i| apply_mask(&data.features()[i], &mask)).collect();
                let mut rows = RowCache::with_budget_mb(FeatureSource { points, kernel: params.kernel }, self.cfg.cache_mb);
                let sol = solve_smo(&mut rows, &y, &cost, &params.smo(y.len()), None)?;
                let points = &rows.source().points;
                Ok(hits(&|v| {
                    let x = apply_mask(&data.features()[v], &mask);
                    (0..train.len())
                        .filter(|&i| sol.alpha[i] > 0.0)
                        .map(|i| sol.alpha[i] * y[i] * params.kernel.eval(&points[i], &x))
                        .sum::<f64>()
                        + sol.bias
                }))
            }
        }
    }

    /// Pooled held-out accuracy over all folds.
    pub fn accuracy(&self, c: f64, gamma: f64, dropped: &[usize]) -> Result<f64> {
        let hits: Vec<usize> = (0..self.folds.len())
            .into_par_iter()
            .map(|k| self.fold_hits(k, c, gamma, dropped))
            .collect::<Result<_>>()?;
        Ok(hits.iter().sum::<usize>() as f64 / self.data.len() as f64)
    }

    /// Accuracies for many configurations, one parallel task per
    /// configuration and fold.
    pub fn accuracies(&self, jobs: &[(f64, f64, Vec<usize>)]) -> Result<Vec<f64>> {
        let k = self.folds.len();
        let hits: Vec<usize> = (0..jobs.len() * k)
            .into_par_iter()
            .map(|t| {
                let (c, gamma, dropped) = &jobs[t / k];
                self.fold_hits(t % k, *c, *gamma, dropped)
            })
            .collect::<Result<_>>()?;
        Ok(hits
            .chunks(k)
            .map(|h| h.iter().sum::<usize>() as f64 / self.data.len() as f64)
            .collect())
    }
}

/// Stratified k-fold grid search. The first cell with the highest accuracy
/// in grid order wins.
pub fn cross_validate(data: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<CvResult> {
    let ctx = CvContext::new(data, cfg, seed)?;
    let jobs: Vec<(f64, f64, Vec<usize>)> = cfg
        .c_grid
        .iter()
        .flat_map(|&c| cfg.gammas().into_iter().map(move |g| (c, g, Vec::new())))
        .collect();
    let acc = ctx.accuracies(&jobs)?;
    let cells: Vec<CvCell> = jobs
        .iter()
        .zip(acc)
        .map(|((c, gamma, _), accuracy)| CvCell { c: *c, gamma: *gamma, accuracy })
        .collect();
    let mut best = cells[0];
    for cell in &cells[1..] {
        if cell.accuracy > best.accuracy {
            best = *cell;
        }
    }
    Ok(CvResult { best, cells })
}
