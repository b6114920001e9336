//! Run reports and their CSV / JSON summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::check_schema;
use crate::error::{at_path, Error, Result};
use crate::svm::CurvePoint;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Supervised,
    Semisup,
    Active,
}

/// One accuracy measurement. `protocol` is `svm` or `svm-screened` for the
/// supervised runs and a semi-supervised protocol name otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub experiment: Experiment,
    /// How the labeled set was chosen: `split`, `random` or `active`.
    pub selection: String,
    pub protocol: String,
    pub labeled: usize,
    pub groups: usize,
    pub repetition: usize,
    pub accuracy: f64,
    pub first_group: Option<f64>,
    pub group_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: Experiment,
    pub selection: String,
    pub protocol: String,
    pub labeled: usize,
    pub groups: usize,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single repetition.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedRepetition {
    pub repetition: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub c: f64,
    pub gamma: f64,
    pub cv_accuracy: f64,
    pub dropped: Vec<usize>,
    pub screening_cv_before: f64,
    pub screening_cv_after: f64,
    pub test_before: f64,
    pub test_after: f64,
    pub support_vectors: usize,
    pub kkt_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemisupRepetition {
    pub labeled: usize,
    pub repetition: usize,
    pub selection: String,
    pub c_labeled: f64,
    pub gamma: f64,
    /// Labeled-set indices into the dataset file.
    pub labeled_records: Vec<usize>,
    /// Runs that stopped early, as `protocol/m: message`.
    pub aborted: Vec<String>,
    /// Groups whose candidate search found a single separator.
    pub collapsed_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Details {
    Supervised { repetitions: Vec<SupervisedRepetition>, curve: Vec<CurvePoint>, feature_order: Vec<usize> },
    Semisup { repetitions: Vec<SemisupRepetition> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<AccuracyRow>,
    pub summary: Vec<SummaryRow>,
    pub details: Details,
}

impl RunReport {
    pub fn new(experiment: Experiment, config_hash: String, seed: u64, rows: Vec<AccuracyRow>, details: Details) -> Self {
        let summary = summarize(&rows);
        Self { schema_version: REPORT_SCHEMA_VERSION, experiment, config_hash, seed, rows, summary, details }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(at_path(path))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        check_schema(&value, REPORT_SCHEMA_VERSION, &path.display().to_string())?;
        Ok(serde_json::from_value(value)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(at_path(path))?;
        Ok(())
    }
}

type Key = (Experiment, String, String, usize, usize);

fn key(r: &AccuracyRow) -> Key {
    (r.experiment, r.selection.clone(), r.protocol.clone(), r.labeled, r.groups)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Mean and spread over repetitions, one row per distinct
/// (experiment, selection, protocol, labeled, groups), in sorted order.
pub fn summarize(rows: &[AccuracyRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(key(r)).or_default().push(r.accuracy);
    }
    groups
        .into_iter()
        .map(|((experiment, selection, protocol, labeled, groups), acc)| {
            let (mean, std) = mean_std(&acc);
            SummaryRow { experiment, selection, protocol, labeled, groups, count: acc.len(), mean, std }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub file: String,
    pub experiment: Experiment,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedSummary {
    pub schema_version: u32,
    pub inputs: Vec<ReportInput>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: Experiment,
    selection: &'a str,
    protocol: &'a str,
    labeled: usize,
    groups: usize,
    repetition: usize,
    accuracy: f64,
    first_group: Option<f64>,
    group_accuracies: String,
}

/// Flat CSV of every row plus a summary over all inputs. Inputs with
/// different schema versions are rejected by name.
pub fn combine(paths: &[&Path]) -> Result<(String, CombinedSummary)> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("no run files given".into()));
    }
    let mut versions = Vec::new();
    for p in paths {
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).map_err(at_path(p))?)?;
        let v = value.get("schema_version").and_then(|v| v.as_u64());
        versions.push((p.display().to_string(), v));
    }
    if versions.iter().any(|(_, v)| *v != versions[0].1) {
        let listed: Vec<String> = versions
            .iter()
            .map(|(f, v)| format!("{f}: {}", v.map_or("none".to_string(), |v| v.to_string())))
            .collect();
        return Err(Error::Schema(format!("run files have mixed schema versions ({})", listed.join(", "))));
    }
    let reports: Vec<RunReport> = paths.iter().map(|p| RunReport::read(p)).collect::<Result<_>>()?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut rows = Vec::new();
    for r in &reports {
        for row in &r.rows {
            let accs: Vec<String> = row.group_accuracies.iter().map(|a| a.to_string()).collect();
            csv.serialize(CsvRow {
                experiment: row.experiment,
                selection: &row.selection,
                protocol: &row.protocol,
                labeled: row.labeled,
                groups: row.groups,
                repetition: row.repetition,
                accuracy: row.accuracy,
                first_group: row.first_group,
                group_accuracies: accs.join(";"),
            })
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            rows.push(row.clone());
        }
    }
    let bytes = csv.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    let inputs = paths
        .iter()
        .zip(&reports)
        .map(|(p, r)| ReportInput {
            file: p.file_name().map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned()),
            experiment: r.experiment,
            config_hash: r.config_hash.clone(),
        })
        .collect();
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    Ok((text, CombinedSummary { schema_version: REPORT_SCHEMA_VERSION, inputs, summary: summarize(&rows) }))
}
