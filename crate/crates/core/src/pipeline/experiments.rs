//! Supervised, semi-supervised and active-learning experiments over a
//! labeled dataset file.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::{ExperimentConfig, SemisupConfig, TuningScope};
use super::records::StateRecord;
use super::report::{AccuracyRow, Details, Experiment, RunReport, SemisupRepetition, SupervisedRepetition};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::s4vm::{active_select, run_protocol, s4vm_cross_validate, Protocol, S4vmConfig, SemisupRun};
use crate::states::{sample_rng, DensityMatrix};
use crate::svm::{
    accuracy_vs_feature_count, cross_validate, kkt_audit, screen_features, stratified_split, train_with, Dataset,
    TrainConfig,
};

use super::records::to_dataset;

// Separate random streams per experiment.
const SUPERVISED: u64 = 1;
const SEMISUP: u64 = 2;
const ACTIVE: u64 = 3;

fn stream(seed: u64, domain: u64, index: u64) -> rand_chacha::ChaCha8Rng {
    sample_rng(seed.wrapping_add(domain.wrapping_mul(0x9E37_79B9_7F4A_7C15)), index)
}

fn derived_seed(seed: u64, domain: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, domain, index).next_u64()
}

/// Balanced subsample with at most `n / 2` points per class.
fn balanced_subsample(data: &Dataset, n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut out = Vec::new();
    for class in [Label::Positive, Label::Negative] {
        let mut idx = data.indices_of(class);
        idx.shuffle(rng);
        idx.truncate(n / 2);
        out.extend(idx);
    }
    out.sort_unstable();
    out
}

pub fn run_supervised(cfg: &ExperimentConfig, records: &[StateRecord]) -> Result<RunReport> {
    cfg.validate()?;
    let data = to_dataset(records)?;
    data.require_both_classes()?;
    let sc = &cfg.supervised;
    let mut rows = Vec::new();
    let mut reps = Vec::new();
    let mut curve = Vec::new();
    let mut feature_order = Vec::new();
    for r in 0..sc.repetitions {
        let mut rng = stream(cfg.seed, SUPERVISED, r as u64);
        let (train_idx, test_idx) = stratified_split(data.labels(), sc.train_fraction, &mut rng)?;
        let train = data.subset(&train_idx);
        let test = data.subset(&test_idx);
        let tune = train.subset(&balanced_subsample(&train, sc.tuning_samples, &mut rng));
        let cv_seed = derived_seed(cfg.seed, SUPERVISED, 1000 + r as u64);
        let cv = cross_validate(&tune, &sc.train, cv_seed)?;
        let (c, gamma) = (cv.best.c, cv.best.gamma);
        let screening = screen_features(&tune, &sc.train, c, gamma, cv_seed)?;
        let params = sc.train.params(c, gamma);
        let full = train_with(&train, &params, None)?;
        let screened = train_with(&train, &params, Some(&screening.mask))?;
        let kkt_passed = [&full, &screened]
            .iter()
            .map(|m| kkt_audit(m, &train, sc.train.tol).map(|a| a.passed))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .all(|p| p);
        let test_before = full.accuracy(&test)?;
        let test_after = screened.accuracy(&test)?;
        log::info!("supervised repetition {r}: C={c:.4} gamma={gamma:.4} test {test_before:.4} -> {test_after:.4}");
        if r == 0 {
            feature_order = screening.ranking.iter().map(|g| g.feature).collect();
            let seeds: Vec<u64> = (0..sc.curve_seeds as u64).map(|k| derived_seed(cfg.seed, SUPERVISED, 2000 + k)).collect();
            curve = accuracy_vs_feature_count(
                &tune,
                &sc.train,
                c,
                gamma,
                &feature_order,
                sc.curve_max_removed,
                sc.train_fraction,
                &seeds,
            )?;
        }
        for (protocol, acc) in [("svm", test_before), ("svm-screened", test_after)] {
            rows.push(AccuracyRow {
                experiment: Experiment::Supervised,
                selection: "split".into(),
                protocol: protocol.into(),
                labeled: train.len(),
                groups: 1,
                repetition: r,
                accuracy: acc,
                first_group: None,
                group_accuracies: vec![],
            });
        }
        reps.push(SupervisedRepetition {
            repetition: r,
            train_size: train.len(),
            test_size: test.len(),
            c,
            gamma,
            cv_accuracy: cv.best.accuracy,
            dropped: screening.dropped.clone(),
            screening_cv_before: screening.cv_before,
            screening_cv_after: screening.cv_after,
            test_before,
            test_after,
            support_vectors: full.support_indices.len(),
            kkt_passed,
        });
    }
    Ok(RunReport::new(
        Experiment::Supervised,
        cfg.hash(),
        cfg.seed,
        rows,
        Details::Supervised { repetitions: reps, curve, feature_order },
    ))
}

/// Per-class shuffled record indices for one repetition.
fn shuffled_classes(data: &Dataset, rng: &mut impl rand::Rng) -> [Vec<usize>; 2] {
    [Label::Positive, Label::Negative].map(|class| {
        let mut idx = data.indices_of(class);
        idx.shuffle(rng);
        idx
    })
}

fn take_balanced(classes: &[Vec<usize>; 2], from: usize, per_class: usize, what: &str) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(2 * per_class);
    for c in classes {
        if c.len() < from + per_class {
            return Err(Error::InvalidParameter(format!(
                "dataset has {} records of one class, {} needed for the {what} set",
                c.len(),
                from + per_class
            )));
        }
        out.extend_from_slice(&c[from..from + per_class]);
    }
    Ok(out)
}

/// `base` with the labeled penalty and kernel width chosen by
/// cross-validation on `labeled`. The unlabeled penalty is capped at the
/// labeled one.
fn tuned(sc: &SemisupConfig, base: &S4vmConfig, grid: &TrainConfig, labeled: &Dataset, seed: u64) -> Result<S4vmConfig> {
    let cv = s4vm_cross_validate(labeled, grid, base, sc.min_neighbor_similarity, seed)?;
    log::info!("S4VM tuning: C1={} gamma={} (cv {:.3})", cv.best.c, cv.best.gamma, cv.best.accuracy);
    Ok(S4vmConfig {
        c_labeled: cv.best.c,
        c_unlabeled: base.c_unlabeled.min(cv.best.c),
        gamma: cv.best.gamma,
        ..base.clone()
    })
}

/// Shuffled per-class record indices with the reserved tuning sample
/// removed, and the S4VM settings for the run.
fn prepare(cfg: &ExperimentConfig, data: &Dataset, domain: u64) -> Result<([Vec<usize>; 2], S4vmConfig)> {
    let sc = &cfg.semisup;
    let mut classes = shuffled_classes(data, &mut stream(cfg.seed, domain, u64::MAX));
    let mut base = sc.s4vm.clone();
    if let (Some(grid), TuningScope::Reserved) = (&sc.tuning, sc.tuning_scope) {
        let k = sc.tuning_samples / 2;
        let reserved = take_balanced(&classes, 0, k, "tuning")?;
        base = tuned(sc, &base, grid, &data.subset(&reserved), derived_seed(cfg.seed, domain, u64::MAX))?;
        for c in &mut classes {
            c.drain(..k);
        }
    }
    Ok((classes, base))
}

fn reshuffled(classes: &[Vec<usize>; 2], rng: &mut impl rand::Rng) -> [Vec<usize>; 2] {
    let mut out = classes.clone();
    for c in &mut out {
        c.shuffle(rng);
    }
    out
}

struct Trial<'a> {
    data: &'a Dataset,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    selection: &'a str,
    repetition: usize,
    groups: &'a [usize],
    base: &'a S4vmConfig,
    seed: u64,
}

fn run_trial(cfg: &ExperimentConfig, experiment: Experiment, t: &Trial) -> Result<(Vec<AccuracyRow>, SemisupRepetition)> {
    let labeled = t.data.subset(&t.labeled);
    let unlabeled = t.data.subset(&t.unlabeled);
    let base = S4vmConfig { seed: t.seed, ..t.base.clone() };
    let s4 = match (&cfg.semisup.tuning, cfg.semisup.tuning_scope) {
        (Some(grid), TuningScope::Labeled) => tuned(&cfg.semisup, &base, grid, &labeled, t.seed)?,
        _ => base,
    };
    let truth = unlabeled.labels();
    let mut rows = Vec::new();
    let mut aborted = Vec::new();
    let mut collapsed_groups = 0;
    let mut record = |protocol: Protocol, m: usize, run: &SemisupRun, rows: &mut Vec<AccuracyRow>| {
        collapsed_groups += run.groups.iter().filter(|g| g.collapsed).count();
        if let Some(msg) = &run.aborted {
            aborted.push(format!("{protocol}/{m}: {msg}"));
        }
        let group_accuracies: Vec<f64> = run.groups.iter().filter_map(|g| g.accuracy).collect();
        rows.push(AccuracyRow {
            experiment,
            selection: t.selection.into(),
            protocol: protocol.name().into(),
            labeled: labeled.len(),
            groups: m,
            repetition: t.repetition,
            // a partial run scores its finished groups
            accuracy: run.mean_accuracy.unwrap_or_else(|| {
                group_accuracies.iter().sum::<f64>() / group_accuracies.len().max(1) as f64
            }),
            first_group: group_accuracies.first().copied(),
            group_accuracies,
        });
    };
    for &protocol in &cfg.semisup.protocols {
        if protocol == Protocol::S4vm {
            // grouping does not apply; one run stands for every m
            let run = run_protocol(protocol, &labeled, unlabeled.features(), Some(truth), 1, &s4)?;
            for &m in t.groups {
                record(protocol, m, &run, &mut rows);
            }
        } else {
            for &m in t.groups {
                let run = run_protocol(protocol, &labeled, unlabeled.features(), Some(truth), m, &s4)?;
                record(protocol, m, &run, &mut rows);
            }
        }
    }
    let rep = SemisupRepetition {
        labeled: labeled.len(),
        repetition: t.repetition,
        selection: t.selection.into(),
        c_labeled: s4.c_labeled,
        gamma: s4.gamma,
        labeled_records: t.labeled.clone(),
        aborted,
        collapsed_groups,
    };
    Ok((rows, rep))
}

fn collect_trials(
    results: Vec<Result<(Vec<AccuracyRow>, SemisupRepetition)>>,
) -> Result<(Vec<AccuracyRow>, Vec<SemisupRepetition>)> {
    let mut rows = Vec::new();
    let mut reps = Vec::new();
    for r in results {
        let (mut rr, rep) = r?;
        rows.append(&mut rr);
        reps.push(rep);
    }
    Ok((rows, reps))
}

/// For each repetition the unlabeled set is shared by every labeled count,
/// and the labeled sets are nested.
pub fn run_semisup(cfg: &ExperimentConfig, records: &[StateRecord]) -> Result<RunReport> {
    cfg.validate()?;
    let data = to_dataset(records)?;
    let sc = &cfg.semisup;
    let half_u = sc.unlabeled / 2;
    let largest = *sc.labeled.iter().max().expect("validated non-empty");
    let (available, base) = prepare(cfg, &data, SEMISUP)?;
    let trials: Vec<Trial> = (0..sc.repetitions)
        .map(|rep| -> Result<Vec<Trial>> {
            let classes = reshuffled(&available, &mut stream(cfg.seed, SEMISUP, rep as u64));
            let unlabeled = take_balanced(&classes, 0, half_u, "unlabeled")?;
            take_balanced(&classes, half_u, largest / 2, "labeled")?;
            sc.labeled
                .iter()
                .map(|&l| {
                    Ok(Trial {
                        data: &data,
                        labeled: take_balanced(&classes, half_u, l / 2, "labeled")?,
                        unlabeled: unlabeled.clone(),
                        selection: "random",
                        repetition: rep,
                        groups: &sc.groups,
                        base: &base,
                        seed: derived_seed(cfg.seed, SEMISUP, 1000 + rep as u64),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let results: Vec<_> = trials.par_iter().map(|t| run_trial(cfg, Experiment::Semisup, t)).collect();
    let (rows, reps) = collect_trials(results)?;
    Ok(RunReport::new(Experiment::Semisup, cfg.hash(), cfg.seed, rows, Details::Semisup { repetitions: reps }))
}

/// Labeled sets of size `active.selected` picked from a labeled pool by
/// mean trace distance and, for comparison, uniformly at random; both are
/// scored on the same unlabeled set.
pub fn run_active(cfg: &ExperimentConfig, records: &[StateRecord]) -> Result<RunReport> {
    cfg.validate()?;
    let data = to_dataset(records)?;
    let ac = &cfg.active;
    let half_u = cfg.semisup.unlabeled / 2;
    let (available, base) = prepare(cfg, &data, ACTIVE)?;
    let mut trials = Vec::new();
    for rep in 0..ac.repetitions {
        let classes = reshuffled(&available, &mut stream(cfg.seed, ACTIVE, rep as u64));
        let unlabeled = take_balanced(&classes, 0, half_u, "unlabeled")?;
        let pool = take_balanced(&classes, half_u, ac.pool / 2, "pool")?;
        let states: Vec<DensityMatrix> = pool.iter().map(|&i| records[i].density()).collect::<Result<_>>()?;
        let pool_labels: Vec<Label> = pool.iter().map(|&i| data.labels()[i]).collect();
        let chosen = active_select(&states, ac.selected, Some(&pool_labels))?;
        let active: Vec<usize> = chosen.iter().map(|&k| pool[k]).collect();
        // the pool lists each class in shuffled order, so its head is a
        // uniform draw
        let per_class = ac.selected / 2;
        let random: Vec<usize> = pool[..per_class].iter().chain(&pool[ac.pool / 2..ac.pool / 2 + per_class]).copied().collect();
        let seed = derived_seed(cfg.seed, ACTIVE, 1000 + rep as u64);
        for (selection, labeled) in [("active", active), ("random", random)] {
            trials.push(Trial {
                data: &data,
                labeled,
                unlabeled: unlabeled.clone(),
                selection,
                repetition: rep,
                groups: &ac.groups,
                base: &base,
                seed,
            });
        }
    }
    let results: Vec<_> = trials.par_iter().map(|t| run_trial(cfg, Experiment::Active, t)).collect();
    let (rows, reps) = collect_trials(results)?;
    Ok(RunReport::new(Experiment::Active, cfg.hash(), cfg.seed, rows, Details::Semisup { repetitions: reps }))
}
