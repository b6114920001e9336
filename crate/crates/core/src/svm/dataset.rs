use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// Provenance of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub generator: String,
    pub gmn: f64,
}

/// Labeled feature vectors. `meta` is either empty or one entry per sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
    meta: Vec<SampleMeta>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        Self::with_meta(features, labels, Vec::new())
    }

    pub fn with_meta(features: Vec<Vec<f64>>, labels: Vec<Label>, meta: Vec<SampleMeta>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
        }
        if !meta.is_empty() && meta.len() != features.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: meta.len() });
        }
        if let Some(first) = features.first() {
            let d = first.len();
            for f in &features {
                if f.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: f.len() });
                }
                if !f.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite);
                }
            }
        }
        Ok(Self { features, labels, meta })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn meta(&self) -> &[SampleMeta] {
        &self.meta
    }

    pub fn signs(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.sign()).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.count(Label::Positive) as f64 / self.len() as f64
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            meta: if self.meta.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.meta[i].clone()).collect()
            },
        }
    }

    /// Appends another dataset with the same feature length.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if !self.is_empty() && !other.is_empty() && other.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        // meta survives only if every sample of the result has one
        let self_full = self.is_empty() || !self.meta.is_empty();
        let other_full = other.is_empty() || !other.meta.is_empty();
        if self_full && other_full {
            self.meta.extend(other.meta.iter().cloned());
        } else {
            self.meta.clear();
        }
        self.features.extend(other.features.iter().cloned());
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    /// Same samples with replaced labels.
    pub fn relabeled(&self, labels: Vec<Label>) -> Result<Self> {
        Self::with_meta(self.features.clone(), labels, self.meta.clone())
    }

    /// Appends a column produced by `f(sample index)`.
    pub fn with_extra_feature(&self, mut f: impl FnMut(usize) -> f64) -> Self {
        let mut out = self.clone();
        for (i, x) in out.features.iter_mut().enumerate() {
            x.push(f(i));
        }
        out
    }

    pub fn require_both_classes(&self) -> Result<()> {
        if self.count(Label::Positive) == 0 || self.count(Label::Negative) == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }
}

/// Assigns every index to one of `k` folds, class by class, so that each
/// fold receives an equal share of both labels (up to one).
pub fn stratified_folds<R: Rng>(labels: &[Label], k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for label in [Label::Positive, Label::Negative] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if idx.len() < k {
            return Err(Error::DegenerateFolds(format!(
                "class {label} has {} samples for {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(rng);
        for (pos, i) in idx.into_iter().enumerate() {
            folds[(pos + offset) % k].push(i);
        }
        offset += labels.iter().filter(|&&l| l == label).count() % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified split keeping `train_fraction` of each class for training.
/// Returns `(train, test)` index lists in ascending order.
pub fn stratified_split<R: Rng>(labels: &[Label], train_fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidParameter(format!("train fraction {train_fraction} outside [0, 1]")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [Label::Positive, Label::Negative] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        idx.shuffle(rng);
        let n_train = (idx.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
