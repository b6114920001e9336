use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-gamma |x - y|^2)`
    Rbf { gamma: f64 },
    /// `<x, y>`; kept for small tests.
    Linear,
}

impl Kernel {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let k = Kernel::Rbf { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidParameter(format!("kernel width {gamma} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Caller guarantees equal lengths.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => (-gamma * squared_distance(x, y)).exp(),
            Kernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    Ok(Kernel::rbf(gamma)?.eval(x, y))
}

/// Kernel entries over a fixed, locally indexed sample set.
pub trait KernelSource {
    fn len(&self) -> usize;

    fn eval(&self, i: usize, j: usize) -> f64;

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.eval(i, j);
        }
    }
}

/// Row access used by the SMO solver.
pub trait KernelRows {
    fn len(&self) -> usize;
    fn diag(&self, i: usize) -> f64;
    fn row(&mut self, i: usize) -> Arc<[f64]>;
}

/// Kernel evaluated on owned feature vectors.
#[derive(Debug, Clone)]
pub struct FeatureSource {
    pub points: Vec<Vec<f64>>,
    pub kernel: Kernel,
}

impl KernelSource for FeatureSource {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn eval(&self, i: usize, j: usize) -> f64 {
        self.kernel.eval(&self.points[i], &self.points[j])
    }
}

/// Symmetric matrix of pairwise squared distances, row-major.
#[derive(Debug, Clone)]
pub struct SquaredDistances {
    n: usize,
    data: Vec<f64>,
}

impl SquaredDistances {
    pub fn new(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let data = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| points.iter().map(move |q| squared_distance(&points[i], q)))
            .collect();
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// RBF kernel read from precomputed distances on a subset of samples, with
/// some features optionally removed by subtracting their contribution.
#[derive(Debug, Clone)]
pub struct DistanceSource<'a> {
    pub distances: &'a SquaredDistances,
    pub points: &'a [Vec<f64>],
    /// Local index to global sample index.
    pub index: Vec<usize>,
    pub gamma: f64,
    pub dropped: Vec<usize>,
}

impl DistanceSource<'_> {
    /// Kernel between two global sample indices.
    pub fn eval_global(&self, a: usize, b: usize) -> f64 {
        let mut d = self.distances.get(a, b);
        if !self.dropped.is_empty() {
            let (x, y) = (&self.points[a], &self.points[b]);
            for &f in &self.dropped {
                d -= (x[f] - y[f]) * (x[f] - y[f]);
            }
            d = d.max(0.0);
        }
        (-self.gamma * d).exp()
    }
}

impl KernelSource for DistanceSource<'_> {
    fn len(&self) -> usize {
        self.index.len()
    }

    fn eval(&self, i: usize, j: usize) -> f64 {
        self.eval_global(self.index[i], self.index[j])
    }
}

/// Fully materialized Gram matrix.
#[derive(Debug, Clone)]
pub struct DenseGram {
    rows: Vec<Arc<[f64]>>,
}

impl DenseGram {
    pub fn from_source<S: KernelSource + Sync>(src: &S) -> Self {
        let n = src.len();
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = vec![0.0; n];
                src.fill_row(i, &mut r);
                Arc::from(r)
            })
            .collect();
        Self { rows }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    /// Restriction to `idx`, reindexed locally.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        let rows = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| self.rows[i][j]).collect::<Vec<_>>().into())
            .collect();
        Self { rows }
    }
}

impl KernelSource for DenseGram {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn eval(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }
}

impl KernelRows for DenseGram {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn diag(&self, i: usize) -> f64 {
        self.rows[i][i]
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        Arc::clone(&self.rows[i])
    }
}

/// Least-recently-used cache of kernel rows.
pub struct RowCache<S> {
    source: S,
    diag: Vec<f64>,
    rows: HashMap<usize, (Arc<[f64]>, u64)>,
    capacity: usize,
    clock: u64,
}

impl<S: KernelSource> RowCache<S> {
    pub fn new(source: S, capacity_rows: usize) -> Self {
        let diag = (0..source.len()).map(|i| source.eval(i, i)).collect();
        Self {
            source,
            diag,
            rows: HashMap::new(),
            capacity: capacity_rows.max(2),
            clock: 0,
        }
    }

    /// Capacity chosen from a memory budget in MiB.
    pub fn with_budget_mb(source: S, mb: usize) -> Self {
        let row_bytes = 8 * source.len().max(1);
        let rows = (mb * 1024 * 1024) / row_bytes;
        Self::new(source, rows)
    }

    pub fn source(&self) -> &S {
        &self.source
    }
}

impl<S: KernelSource> KernelRows for RowCache<S> {
    fn len(&self) -> usize {
        self.source.len()
    }

    fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        self.clock += 1;
        if let Some((row, stamp)) = self.rows.get_mut(&i) {
            *stamp = self.clock;
            return Arc::clone(row);
        }
        if self.rows.len() >= self.capacity {
            if let Some(&oldest) = self.rows.iter().min_by_key(|(_, (_, s))| *s).map(|(k, _)| k) {
                self.rows.remove(&oldest);
            }
        }
        let mut r = vec![0.0; self.source.len()];
        self.source.fill_row(i, &mut r);
        let row: Arc<[f64]> = Arc::from(r);
        self.rows.insert(i, (Arc::clone(&row), self.clock));
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::symmetric_eigenvalues;
    use crate::numerics::RealMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rbf_examples() {
        let x = [0.3, -1.2, 2.0];
        assert_eq!(rbf_kernel(&x, &x, 0.7).unwrap(), 1.0);
        assert!((rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(rbf_kernel(&[0.0], &[1.0, 0.0], 1.0).is_err());
        assert!(rbf_kernel(&[0.0], &[1.0], 0.0).is_err());
        assert!(rbf_kernel(&[0.0], &[1.0], -2.0).is_err());
    }

    #[test]
    fn gram_on_random_points_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let k = Kernel::rbf(0.8).unwrap();
        let g = RealMatrix::from_fn(5, 5, |i, j| k.eval(&pts[i], &pts[j]));
        assert_eq!(g, g.transpose());
        assert!(symmetric_eigenvalues(&g).unwrap()[0] > -1e-12);
    }

    #[test]
    fn distance_source_drops_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<Vec<f64>> = (0..6).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let d2 = SquaredDistances::new(&pts);
        let src = DistanceSource { distances: &d2, points: &pts, index: vec![4, 1, 3], gamma: 0.6, dropped: vec![0, 3] };
        let keep = |p: &Vec<f64>| vec![p[1], p[2], p[4]];
        let k = Kernel::rbf(0.6).unwrap();
        for (i, &a) in src.index.iter().enumerate() {
            for (j, &b) in src.index.iter().enumerate() {
                assert!((src.eval(i, j) - k.eval(&keep(&pts[a]), &keep(&pts[b]))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cache_evicts_and_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let src = FeatureSource { points: pts, kernel: Kernel::rbf(1.3).unwrap() };
        let mut dense = DenseGram::from_source(&src);
        let mut cache = RowCache::new(src, 3);
        for i in (0..10).chain((0..10).rev()) {
            assert_eq!(&*cache.row(i), &*dense.row(i));
            assert!(cache.rows.len() <= 3);
        }
        assert_eq!(cache.diag(4), 1.0);
    }
}
