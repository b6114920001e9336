//! Quota-driven generation and labeling of random states.

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::records::{matrix_entries, StateRecord, DATASET_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::sdp::{label_state_with, renormalized_gmn_with, verify_certificate, SolveStatus, SolverConfig};
use crate::states::{bloch_features, random_density, sample_rng, DensityMatrix, GeneratorSpec};

/// Offset of the master seed for the generator-choice streams, which keeps
/// each state reproducible from `(seed, index, generator)` alone.
const CHOICE_SALT: u64 = 0x5DEE_CE66_D1CE_4E5B;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorStats {
    pub generator: String,
    pub drawn: usize,
    pub positive: usize,
    pub negative: usize,
    /// Solves that did not reach an optimal status.
    pub failed: usize,
    pub kept: usize,
}

impl GeneratorStats {
    fn acceptance(&self) -> f64 {
        self.kept as f64 / self.drawn.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub records: Vec<StateRecord>,
    pub stats: Vec<GeneratorStats>,
    pub attempts: usize,
}

/// The state with stream `index`, drawn from `spec`.
pub fn regenerate(seed: u64, index: u64, spec: &GeneratorSpec) -> Result<DensityMatrix> {
    random_density(&mut sample_rng(seed, index), spec)
}

/// Base weight times the Laplace-smoothed rate at which each generator has
/// produced the classes still needed.
fn adapted_weights(cfg: &ExperimentConfig, stats: &[GeneratorStats], need: [usize; 2]) -> Vec<f64> {
    let total = (need[0] + need[1]) as f64;
    cfg.generation
        .generators
        .iter()
        .zip(stats)
        .map(|(g, s)| {
            let n = s.drawn as f64 + 2.0;
            let pos = (s.positive as f64 + 1.0) / n;
            let neg = (s.negative as f64 + 1.0) / n;
            g.weight * (need[0] as f64 * pos + need[1] as f64 * neg) / total
        })
        .collect()
}

pub fn generate(cfg: &ExperimentConfig) -> Result<GenerationOutcome> {
    cfg.validate()?;
    let gen = &cfg.generation;
    let mut stats: Vec<GeneratorStats> = gen
        .generators
        .iter()
        .map(|g| GeneratorStats { generator: g.spec.to_string(), drawn: 0, positive: 0, negative: 0, failed: 0, kept: 0 })
        .collect();
    let mut need = [gen.positive, gen.negative];
    let mut records = Vec::with_capacity(gen.positive + gen.negative);
    let mut attempts = 0usize;

    while need[0] + need[1] > 0 {
        if attempts >= gen.max_attempts {
            let rates: Vec<String> =
                stats.iter().map(|s| format!("{} {:.3} ({} drawn)", s.generator, s.acceptance(), s.drawn)).collect();
            return Err(Error::Quota(format!(
                "{} positive and {} negative records still missing after {attempts} attempts; acceptance: {}",
                need[0],
                need[1],
                rates.join(", ")
            )));
        }
        let weights = adapted_weights(cfg, &stats, need);
        let choice = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let count = gen.batch.min(gen.max_attempts - attempts);
        let start = attempts as u64;
        let batch: Vec<(u64, usize, Result<(DensityMatrix, crate::sdp::LabeledState)>)> = (start..start + count as u64)
            .into_par_iter()
            .map(|index| {
                let g = choice.sample(&mut sample_rng(cfg.seed.wrapping_add(CHOICE_SALT), index));
                let labeled = regenerate(cfg.seed, index, &gen.generators[g].spec)
                    .and_then(|rho| label_state_with(&rho, &cfg.solver).map(|l| (rho, l)));
                (index, g, labeled)
            })
            .collect();
        attempts += count;

        for (index, g, outcome) in batch {
            let s = &mut stats[g];
            s.drawn += 1;
            let (rho, labeled) = match outcome {
                Ok(v) => v,
                Err(Error::Solver(msg)) => {
                    log::debug!("sample {index} rejected: {msg}");
                    s.failed += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let slot = match labeled.label {
                Label::Positive => {
                    s.positive += 1;
                    0
                }
                Label::Negative => {
                    s.negative += 1;
                    1
                }
            };
            if need[slot] == 0 {
                continue;
            }
            need[slot] -= 1;
            s.kept += 1;
            records.push(StateRecord {
                schema_version: DATASET_SCHEMA_VERSION,
                index,
                seed: cfg.seed,
                generator: gen.generators[g].spec.clone(),
                features: bloch_features(&rho).coeffs,
                gmn: labeled.gmn.value,
                duality_gap: labeled.gmn.duality_gap,
                label: labeled.label,
                status: labeled.gmn.status,
                matrix: gen.store_matrices.then(|| matrix_entries(&rho)),
            });
        }
    }
    for s in &stats {
        log::info!(
            "{}: drawn {}, +1 {}, -1 {}, failed {}, kept {} (acceptance {:.3})",
            s.generator,
            s.drawn,
            s.positive,
            s.negative,
            s.failed,
            s.kept,
            s.acceptance()
        );
    }
    Ok(GenerationOutcome { records, stats, attempts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    /// Stream indices whose regenerated features differ from the record.
    pub feature_mismatches: Vec<u64>,
    /// Re-solves that disagree with the stored label or are not optimal.
    pub label_mismatches: Vec<u64>,
    pub certificate_failures: Vec<u64>,
    /// Records whose stored GMN contradicts their label.
    pub threshold_violations: Vec<u64>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.feature_mismatches.is_empty()
            && self.label_mismatches.is_empty()
            && self.certificate_failures.is_empty()
            && self.threshold_violations.is_empty()
    }
}

/// Re-solves a random `fraction` of the records from their regenerated
/// states and checks every record's label against its stored GMN.
pub fn audit(records: &[StateRecord], fraction: f64, seed: u64, solver: &SolverConfig) -> Result<AuditReport> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("audit fraction {fraction} outside [0, 1]")));
    }
    let threshold = solver.tolerances.label_threshold;
    let threshold_violations = records
        .iter()
        .filter(|r| (r.label == Label::Negative) != (r.gmn > threshold))
        .map(|r| r.index)
        .collect();
    let k = if fraction == 0.0 || records.is_empty() {
        0
    } else {
        ((fraction * records.len() as f64).ceil() as usize).clamp(1, records.len())
    };
    let mut picked = rand::seq::index::sample(&mut sample_rng(seed, u64::MAX), records.len(), k).into_vec();
    picked.sort_unstable();

    struct Check {
        index: u64,
        features: bool,
        label: bool,
        certificate: bool,
    }
    let checks: Vec<Check> = picked
        .par_iter()
        .map(|&i| {
            let r = &records[i];
            let rho = regenerate(r.seed, r.index, &r.generator)?;
            let features = bloch_features(&rho).coeffs == r.features;
            let gmn = renormalized_gmn_with(&rho, solver)?;
            let label = gmn.status == SolveStatus::Optimal
                && crate::sdp::gmn::label_from_value(gmn.value, threshold) == r.label;
            let certificate = verify_certificate(&gmn.certificate, &rho, solver.tolerances.certificate);
            Ok(Check { index: r.index, features, label, certificate })
        })
        .collect::<Result<_>>()?;
    let failing = |f: fn(&Check) -> bool| checks.iter().filter(|c| !f(c)).map(|c| c.index).collect::<Vec<_>>();
    Ok(AuditReport {
        checked: checks.len(),
        feature_mismatches: failing(|c| c.features),
        label_mismatches: failing(|c| c.label),
        certificate_failures: failing(|c| c.certificate),
        threshold_violations,
    })
}
