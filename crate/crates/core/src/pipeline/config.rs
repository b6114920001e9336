//! Experiment configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::s4vm::{Protocol, S4vmConfig};
use crate::sdp::SolverConfig;
use crate::states::GeneratorSpec;
use crate::svm::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedGenerator {
    pub spec: GeneratorSpec,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Records wanted with label +1 (not genuinely entangled).
    pub positive: usize,
    /// Records wanted with label -1.
    pub negative: usize,
    /// Base mixing weights; rescaled online by each generator's observed
    /// yield of the classes still short.
    pub generators: Vec<WeightedGenerator>,
    /// Candidates drawn between weight updates.
    pub batch: usize,
    /// Give up after this many candidates in total.
    pub max_attempts: usize,
    /// Fraction of records re-solved by the audit.
    pub audit_fraction: f64,
    /// Also store the raw density matrix entries.
    pub store_matrices: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let g = |spec, weight| WeightedGenerator { spec, weight };
        Self {
            positive: 5500,
            negative: 5500,
            generators: vec![g(GeneratorSpec::Ginibre { rank: None }, 1.0)],
            batch: 256,
            max_attempts: 200_000,
            audit_fraction: 0.01,
            store_matrices: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisedConfig {
    pub train_fraction: f64,
    pub train: TrainConfig,
    /// Balanced subsample of the training split used for the grid search
    /// and screening; the final models see the whole split.
    pub tuning_samples: usize,
    /// Number of split seeds.
    pub repetitions: usize,
    /// Points of the accuracy-versus-feature-count curve.
    pub curve_max_removed: usize,
    pub curve_seeds: usize,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            train: TrainConfig::default(),
            tuning_samples: 1000,
            repetitions: 5,
            curve_max_removed: 20,
            curve_seeds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemisupConfig {
    /// Labeled counts, each split evenly between the classes.
    pub labeled: Vec<usize>,
    pub unlabeled: usize,
    pub groups: Vec<usize>,
    pub repetitions: usize,
    pub protocols: Vec<Protocol>,
    pub s4vm: S4vmConfig,
    /// Grid for choosing the labeled penalty and kernel width by
    /// cross-validation; `None` keeps the S4VM values.
    pub tuning: Option<TrainConfig>,
    pub tuning_scope: TuningScope,
    /// Size of the reserved tuning sample.
    pub tuning_samples: usize,
    /// Kernel widths whose median nearest-neighbour similarity on the
    /// tuning data is below this are skipped.
    pub min_neighbor_similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningScope {
    /// Once per run, on a balanced labeled sample kept apart from every
    /// labeled, unlabeled and pool set.
    Reserved,
    /// Separately on each labeled set.
    Labeled,
}

impl Default for SemisupConfig {
    fn default() -> Self {
        Self {
            labeled: vec![40, 60, 80],
            unlabeled: 2000,
            groups: vec![2, 4, 8, 16],
            repetitions: 6,
            protocols: Protocol::ALL.to_vec(),
            s4vm: S4vmConfig::default(),
            tuning: Some(TrainConfig { c_grid: vec![S4vmConfig::default().c_labeled], ..TrainConfig::default() }),
            tuning_scope: TuningScope::Reserved,
            tuning_samples: 1000,
            min_neighbor_similarity: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveConfig {
    /// Labeled pool the selection draws from.
    pub pool: usize,
    pub selected: usize,
    pub groups: Vec<usize>,
    pub repetitions: usize,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self { pool: 2000, selected: 60, groups: vec![8], repetitions: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub generation: GenerationConfig,
    pub solver: SolverConfig,
    pub supervised: SupervisedConfig,
    pub semisup: SemisupConfig,
    pub active: ActiveConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            generation: GenerationConfig::default(),
            solver: SolverConfig::default(),
            supervised: SupervisedConfig::default(),
            semisup: SemisupConfig::default(),
            active: ActiveConfig::default(),
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.generation;
        if g.positive + g.negative == 0 {
            return bad("generation quotas are both zero");
        }
        if g.generators.is_empty() || g.generators.iter().any(|w| !(w.weight >= 0.0 && w.weight.is_finite())) {
            return bad("generator weights must be finite and non-negative");
        }
        if g.generators.iter().all(|w| w.weight == 0.0) {
            return bad("all generator weights are zero");
        }
        for w in &g.generators {
            w.spec.validate()?;
        }
        if g.batch == 0 || g.max_attempts == 0 {
            return bad("batch and max_attempts must be positive");
        }
        if !(0.0..=1.0).contains(&g.audit_fraction) {
            return bad("audit fraction must lie in [0, 1]");
        }
        let s = &self.supervised;
        s.train.validate()?;
        if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
            return bad("train fraction must lie in (0, 1)");
        }
        if s.repetitions == 0 || s.curve_seeds < 2 || s.tuning_samples < 2 * s.train.folds {
            return bad("supervised repetitions, curve seeds or tuning samples too small");
        }
        let m = &self.semisup;
        m.s4vm.validate()?;
        if let Some(t) = &m.tuning {
            t.validate()?;
            if m.tuning_scope == TuningScope::Reserved && m.tuning_samples < 2 * t.folds {
                return bad("reserved tuning sample smaller than two per fold");
            }
        }
        if !(0.0..1.0).contains(&m.min_neighbor_similarity) {
            return bad("min_neighbor_similarity must lie in [0, 1)");
        }
        if m.labeled.is_empty() || m.labeled.iter().any(|&l| l == 0 || l % 2 != 0) {
            return bad("labeled counts must be positive and even");
        }
        if m.unlabeled == 0 || m.unlabeled % 2 != 0 {
            return bad("unlabeled count must be positive and even");
        }
        if m.groups.is_empty() || m.groups.iter().any(|&k| k == 0 || 2 * k > m.unlabeled) {
            return bad("group counts must lie in 1..=unlabeled/2");
        }
        if m.repetitions == 0 || m.protocols.is_empty() {
            return bad("need at least one repetition and one protocol");
        }
        let a = &self.active;
        if a.selected == 0 || a.selected % 2 != 0 || a.selected > a.pool || a.repetitions == 0 {
            return bad("active selection must be even, positive and at most the pool");
        }
        if a.groups.is_empty() || a.groups.iter().any(|&k| k == 0 || 2 * k > m.unlabeled) {
            return bad("active group counts must lie in 1..=unlabeled/2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 7, ..a.clone() };
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn partial_json_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 5, "semisup": {"unlabeled": 100, "groups": [2]}}"#).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.semisup.labeled, vec![40, 60, 80]);
        assert_eq!(cfg.semisup.unlabeled, 100);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut odd = ExperimentConfig::default();
        odd.semisup.labeled = vec![41];
        assert!(odd.validate().is_err());
        let mut groups = ExperimentConfig::default();
        groups.semisup.groups = vec![1001];
        assert!(groups.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": "x"}"#).is_err());
        let mut weights = ExperimentConfig::default();
        weights.generation.generators.iter_mut().for_each(|w| w.weight = 0.0);
        assert!(weights.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"generation": {"quotas": [3, 3]}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"solver": {"tolerances": {"label": 1e-3}}}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"solver": {"max_iters": 50}}"#).unwrap();
        assert_eq!(cfg.solver.max_iters, 50);
    }
}
