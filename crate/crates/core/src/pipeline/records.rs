//! JSON-lines dataset files.
//!
//! One record per line, fields in this order:
//! `schema_version`, `index` (sample stream under the master seed), `seed`
//! (master seed), `generator`, `features` (64 Pauli expectation values),
//! `gmn`, `duality_gap`, `label` (+1 or -1), `status`, and optionally
//! `matrix` (64 row-major `[re, im]` pairs).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{at_path, Error, Result};
use crate::label::Label;
use crate::numerics::{c64, ComplexMatrix};
use crate::sdp::SolveStatus;
use crate::states::{from_bloch, BlochVector, DensityMatrix, FeatureLayout, GeneratorSpec};
use crate::svm::{Dataset, SampleMeta};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub schema_version: u32,
    pub index: u64,
    pub seed: u64,
    pub generator: GeneratorSpec,
    pub features: Vec<f64>,
    pub gmn: f64,
    pub duality_gap: f64,
    pub label: Label,
    pub status: SolveStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

impl StateRecord {
    pub fn density(&self) -> Result<DensityMatrix> {
        match &self.matrix {
            Some(entries) => {
                if entries.len() != 64 {
                    return Err(Error::DimensionMismatch { expected: 64, got: entries.len() });
                }
                DensityMatrix::new(ComplexMatrix::from_fn(8, 8, |i, j| {
                    let [re, im] = entries[8 * i + j];
                    c64(re, im)
                }))
            }
            None => from_bloch(&BlochVector { coeffs: self.features.clone(), layout: FeatureLayout::Pauli }),
        }
    }
}

pub fn matrix_entries(rho: &DensityMatrix) -> Vec<[f64; 2]> {
    let m = rho.matrix();
    (0..64).map(|k| [m[(k / 8, k % 8)].re, m[(k / 8, k % 8)].im]).collect()
}

pub fn write_records(path: &Path, records: &[StateRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(at_path(path))?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Checks the `schema_version` field of a parsed JSON object.
pub fn check_schema(value: &serde_json::Value, expected: u32, what: &str) -> Result<()> {
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == expected as u64 => Ok(()),
        Some(v) => Err(Error::Schema(format!("{what} has schema version {v}, expected {expected}"))),
        None => Err(Error::Schema(format!("{what} has no schema version"))),
    }
}

pub fn read_records(path: &Path) -> Result<Vec<StateRecord>> {
    let reader = BufReader::new(File::open(path).map_err(at_path(path))?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)?;
        check_schema(&value, DATASET_SCHEMA_VERSION, &format!("{} line {}", path.display(), n + 1))?;
        out.push(serde_json::from_value(value)?);
    }
    Ok(out)
}

pub fn to_dataset(records: &[StateRecord]) -> Result<Dataset> {
    Dataset::with_meta(
        records.iter().map(|r| r.features.clone()).collect(),
        records.iter().map(|r| r.label).collect(),
        records
            .iter()
            .map(|r| SampleMeta { seed: r.index, generator: r.generator.to_string(), gmn: r.gmn })
            .collect(),
    )
}
