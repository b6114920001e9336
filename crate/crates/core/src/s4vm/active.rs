//! Selection of representative states by mean trace distance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::states::{trace_distance, DensityMatrix};

/// Mean trace distance from each state to all the others.
pub fn mean_trace_distances(pool: &[DensityMatrix]) -> Vec<f64> {
    let n = pool.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| trace_distance(&pool[i], &pool[j])).collect())
        .collect();
    let mut sums = vec![0.0; n];
    for (i, row) in rows.iter().enumerate() {
        for (off, d) in row.iter().enumerate() {
            sums[i] += d;
            sums[i + 1 + off] += d;
        }
    }
    sums.iter().map(|s| s / (n - 1) as f64).collect()
}

fn ascending(scores: &[f64], idx: &mut [usize]) {
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
}

/// Indices of the `k` states with the smallest mean trace distance. With
/// labels, `k/2` are taken from each class (the extra one for odd `k` from
/// the positive class).
pub fn active_select(pool: &[DensityMatrix], k: usize, labels: Option<&[Label]>) -> Result<Vec<usize>> {
    if k > pool.len() {
        return Err(Error::InvalidParameter(format!("cannot select {k} of {} states", pool.len())));
    }
    let scores = mean_trace_distances(pool);
    let Some(labels) = labels else {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        ascending(&scores, &mut idx);
        idx.truncate(k);
        return Ok(idx);
    };
    if labels.len() != pool.len() {
        return Err(Error::DimensionMismatch { expected: pool.len(), got: labels.len() });
    }
    let quota = [(Label::Positive, k - k / 2), (Label::Negative, k / 2)];
    let mut out = Vec::with_capacity(k);
    for (class, q) in quota {
        let mut idx: Vec<usize> = (0..pool.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < q {
            return Err(Error::InvalidParameter(format!("only {} states of class {class:?}, need {q}", idx.len())));
        }
        ascending(&scores, &mut idx);
        out.extend_from_slice(&idx[..q]);
    }
    out.sort_unstable();
    Ok(out)
}
