use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::svm::{squared_distance, stratified_folds, CvCell, CvResult, Dataset, TrainConfig};

use super::candidates::S4vmConfig;
use super::protocol::s4vm_predict;

/// Grid search over `C1` and `gamma` scored by transductive S4VM accuracy:
/// each held-out fold is the unlabeled set of a run trained on the others.
///
/// Plain SVM cross-validation only scores signs, so it happily picks a
/// bandwidth where the unlabeled points barely see each other and the S3VM
/// objective then prefers one-sided labelings. Scoring the S4VM itself avoids
/// most of that. Held-out folds still miss the grouped protocols, whose
/// training sets grow with pseudo-labels, so widths whose median
/// nearest-neighbour similarity falls below `min_neighbor_similarity` are
/// not scored at all. If no width qualifies, the smallest one is kept.
/// `C2` is capped at each cell's `C1`. Ties keep the earlier cell.
pub fn s4vm_cross_validate(
    data: &Dataset,
    grid: &TrainConfig,
    base: &S4vmConfig,
    min_neighbor_similarity: f64,
    seed: u64,
) -> Result<CvResult> {
    grid.validate()?;
    data.require_both_classes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = stratified_folds(data.labels(), grid.folds, &mut rng)?;
    let gammas = connected_widths(data.features(), &grid.gamma_grid, min_neighbor_similarity);
    let cells: Vec<(f64, f64)> =
        grid.c_grid.iter().flat_map(|&c| gammas.iter().copied().map(move |g| (c, g))).collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|i| (0..folds.len()).map(move |k| (i, k))).collect();
    let hits: Vec<(usize, usize)> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let (c, gamma) = cells[i];
            let cfg = S4vmConfig {
                c_labeled: c,
                c_unlabeled: base.c_unlabeled.min(c),
                gamma,
                seed: base.seed.wrapping_add(k as u64),
                ..base.clone()
            };
            let (train, test) = (complement(&folds, k), &folds[k]);
            let labeled = data.subset(&train);
            let unlabeled: Vec<Vec<f64>> = test.iter().map(|&j| data.features()[j].clone()).collect();
            let pred = s4vm_predict(&labeled, &unlabeled, &cfg)?;
            let right = test.iter().zip(&pred.labels).filter(|(&j, &p)| data.labels()[j] == p).count();
            Ok((right, test.len()))
        })
        .collect::<Result<_>>()?;
    let per_fold = folds.len();
    let scored: Vec<CvCell> = cells
        .iter()
        .enumerate()
        .map(|(i, &(c, gamma))| {
            let (right, total) = hits[i * per_fold..(i + 1) * per_fold]
                .iter()
                .fold((0, 0), |(r, t), &(a, b)| (r + a, t + b));
            CvCell { c, gamma, accuracy: right as f64 / total as f64 }
        })
        .collect();
    let mut best = scored[0];
    for cell in &scored[1..] {
        if cell.accuracy > best.accuracy {
            best = *cell;
        }
    }
    Ok(CvResult { best, cells: scored })
}

/// Median over points of the squared distance to the nearest other point.
pub fn median_neighbor_distance(x: &[Vec<f64>]) -> f64 {
    let mut nearest: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            x.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, y)| squared_distance(&x[i], y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nearest.sort_by(f64::total_cmp);
    nearest[nearest.len() / 2]
}

fn connected_widths(x: &[Vec<f64>], grid: &[f64], min_similarity: f64) -> Vec<f64> {
    let d = median_neighbor_distance(x);
    let kept: Vec<f64> = grid.iter().copied().filter(|g| (-g * d).exp() >= min_similarity).collect();
    if !kept.is_empty() {
        return kept;
    }
    log::warn!("no kernel width keeps neighbours similar (median nearest distance {d:.3}); using the smallest");
    vec![grid.iter().copied().fold(f64::INFINITY, f64::min)]
}

fn complement(folds: &[Vec<usize>], k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = folds.iter().enumerate().filter(|(i, _)| *i != k).flat_map(|(_, f)| f.iter().copied()).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::s4vm::candidates::tests::{blob_config, blobs};

    #[test]
    fn scores_every_cell_and_rejects_isolating_bandwidth() {
        let (labeled, unlabeled, truth) = blobs(3, 40, 60);
        let mut feats = labeled.features().to_vec();
        let mut labels = labeled.labels().to_vec();
        feats.extend(unlabeled);
        labels.extend(truth);
        let data = Dataset::new(feats, labels).unwrap();
        let grid = TrainConfig { c_grid: vec![100.0], gamma_grid: vec![0.5, 1e4], ..TrainConfig::default() };
        let cfg = S4vmConfig { restarts: 4, sweeps: 10, ..blob_config(0) };
        let cv = s4vm_cross_validate(&data, &grid, &cfg, 0.0, 7).unwrap();
        assert_eq!(cv.cells.len(), 2);
        assert!(cv.cells[0].accuracy > 0.95, "{:?}", cv.cells);
        assert!(cv.cells[1].accuracy < cv.cells[0].accuracy, "{:?}", cv.cells);
        assert_eq!(cv.best.gamma, 0.5);
    }

    #[test]
    fn drops_widths_that_isolate_points() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        assert_eq!(median_neighbor_distance(&x), 1.0);
        assert_eq!(connected_widths(&x, &[0.1, 1.0, 10.0], 0.05), vec![0.1, 1.0]);
        assert_eq!(connected_widths(&x, &[30.0, 10.0], 0.05), vec![10.0]);
    }

    #[test]
    fn folds_partition() {
        let folds = vec![vec![0, 3], vec![1, 4], vec![2]];
        assert_eq!(complement(&folds, 1), vec![0, 2, 3]);
    }
}
