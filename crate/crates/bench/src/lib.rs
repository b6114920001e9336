//! Fixtures shared by the benchmarks.

use gme_core::states::{bloch_features, min_negativity, random_density, sample_rng, DensityMatrix, GeneratorSpec};
use gme_core::svm::Dataset;
use gme_core::Label;

/// Reproducible Hilbert-Schmidt states of a fixed rank.
pub fn states(n: usize, rank: usize, seed: u64) -> Vec<DensityMatrix> {
    let spec = GeneratorSpec::Ginibre { rank: Some(rank) };
    (0..n as u64).map(|i| random_density(&mut sample_rng(seed, i), &spec).expect("valid spec")).collect()
}

/// Feature vectors of random states split at the median of the smallest
/// bipartite negativity. Cheap to build and close enough to the real task
/// for timing.
pub fn negativity_dataset(n: usize, seed: u64) -> Dataset {
    let pool = states(n, 8, seed);
    let features = pool.iter().map(|r| bloch_features(r).coeffs).collect();
    let neg: Vec<f64> = pool.iter().map(min_negativity).collect();
    let mut sorted = neg.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let labels = neg.iter().map(|&v| if v >= median { Label::Negative } else { Label::Positive }).collect();
    Dataset::new(features, labels).expect("consistent lengths")
}
