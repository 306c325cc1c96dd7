//! Sample storage and ingestion.
//!
//! Two on-disk formats are understood: the sparse `label index:value ...`
//! text format (1-indexed features) and dense CSV with a named label
//! column. Labels must end up in {+1, -1}; `remap_labels` converts anything
//! else on ingestion.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{CoreError, Result};
use crate::rng::{self, Purpose};

/// Feature rows plus labels. Rows are stored row-major and never change
/// after construction (scaling produces the new values in place before the
/// set is handed to an objective).
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn from_parts(features: Vec<f64>, dim: usize, labels: Vec<f64>) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(CoreError::Dataset(format!(
                "feature buffer of {} does not match {} rows x {} dims",
                features.len(),
                labels.len(),
                dim
            )));
        }
        Ok(Dataset {
            features,
            dim,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature_row(&self, idx: usize) -> &[f64] {
        &self.features[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn label(&self, idx: usize) -> f64 {
        self.labels[idx]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// All labels equal to `positive` become +1, everything else -1.
    pub fn remap_labels(&mut self, positive: f64) {
        for l in self.labels.iter_mut() {
            *l = if *l == positive { 1.0 } else { -1.0 };
        }
    }

    pub fn validate_labels(&self) -> Result<()> {
        for &l in &self.labels {
            if l != 1.0 && l != -1.0 {
                return Err(CoreError::InvalidLabel(l));
            }
        }
        Ok(())
    }

    /// Reads the sparse text format: one sample per line, leading label
    /// token, then `index:value` pairs with 1-indexed feature indices.
    /// `dim` pads every row to a fixed width; when absent the maximum seen
    /// index decides it.
    pub fn read_sparse(path: &Path, dim: Option<usize>) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
        let mut max_index = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let label: f64 = parts
                .next()
                .unwrap()
                .parse()
                .map_err(|_| CoreError::Dataset(format!("line {}: bad label", lineno + 1)))?;
            let mut entries = Vec::new();
            for token in parts {
                let (idx, val) = token.split_once(':').ok_or_else(|| {
                    CoreError::Dataset(format!("line {}: expected index:value", lineno + 1))
                })?;
                let idx: usize = idx.parse().map_err(|_| {
                    CoreError::Dataset(format!("line {}: bad feature index", lineno + 1))
                })?;
                if idx == 0 {
                    return Err(CoreError::Dataset(format!(
                        "line {}: feature indices are 1-based",
                        lineno + 1
                    )));
                }
                let val: f64 = val.parse().map_err(|_| {
                    CoreError::Dataset(format!("line {}: bad feature value", lineno + 1))
                })?;
                max_index = max_index.max(idx);
                entries.push((idx - 1, val));
            }
            rows.push((label, entries));
        }
        if rows.is_empty() {
            return Err(CoreError::Dataset("no samples in file".into()));
        }
        let dim = dim.unwrap_or(max_index);
        if max_index > dim {
            return Err(CoreError::Dataset(format!(
                "feature index {max_index} exceeds declared dimension {dim}"
            )));
        }
        let mut features = vec![0.0; rows.len() * dim];
        let mut labels = Vec::with_capacity(rows.len());
        for (r, (label, entries)) in rows.into_iter().enumerate() {
            labels.push(label);
            for (idx, val) in entries {
                features[r * dim + idx] = val;
            }
        }
        Dataset::from_parts(features, dim, labels)
    }

    /// Reads dense CSV with a header line; `label_column` names the label,
    /// every other column is a feature in header order.
    pub fn read_csv(path: &Path, label_column: &str) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| CoreError::Dataset("empty CSV file".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let label_pos = columns
            .iter()
            .position(|c| *c == label_column)
            .ok_or_else(|| {
                CoreError::Dataset(format!("label column '{label_column}' not in header"))
            })?;
        let dim = columns.len() - 1;
        if dim == 0 {
            return Err(CoreError::Dataset("CSV has no feature columns".into()));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(CoreError::Dataset(format!(
                    "line {}: {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    columns.len()
                )));
            }
            for (pos, field) in fields.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| {
                    CoreError::Dataset(format!("line {}: bad number '{field}'", lineno + 2))
                })?;
                if pos == label_pos {
                    labels.push(value);
                } else {
                    features.push(value);
                }
            }
        }
        Dataset::from_parts(features, dim, labels)
    }

    /// Optional min-max scaling of every feature column to [0, 1];
    /// constant columns become 0.
    pub fn min_max_scale(&mut self) {
        for d in 0..self.dim {
            let mut lo = f64::MAX;
            let mut hi = f64::MIN;
            for r in 0..self.len() {
                let v = self.features[r * self.dim + d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let span = hi - lo;
            for r in 0..self.len() {
                let v = &mut self.features[r * self.dim + d];
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
    }

    /// Seeded shuffle, then the first `train` rows become the training set
    /// and the rest the evaluation set.
    pub fn split(&self, train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if train == 0 || train > self.len() {
            return Err(CoreError::Dataset(format!(
                "train split {train} out of range for {} samples",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = rng::stream(seed, 0, 0, Purpose::Data);
        order.shuffle(&mut rng);
        let make = |indices: &[usize]| {
            let mut features = Vec::with_capacity(indices.len() * self.dim);
            let mut labels = Vec::with_capacity(indices.len());
            for &idx in indices {
                features.extend_from_slice(self.feature_row(idx));
                labels.push(self.label(idx));
            }
            Dataset::from_parts(features, self.dim, labels).expect("consistent by construction")
        };
        Ok((make(&order[..train]), make(&order[train..])))
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        (0..self.len())
            .map(|r| crate::linalg::dot(self.feature_row(r), self.feature_row(r)))
            .fold(0.0, f64::max)
    }
}

/// Shuffles sample indices with the seed and deals them out evenly;
/// when `m` does not divide the count, the first agents take one extra.
pub fn partition_evenly(n_samples: usize, m: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut rng = rng::stream(seed, 0, 1, Purpose::Data);
    order.shuffle(&mut rng);
    let base = n_samples / m;
    let extra = n_samples % m;
    let mut parts = Vec::with_capacity(m);
    let mut cursor = 0;
    for i in 0..m {
        let take = base + usize::from(i < extra);
        parts.push(order[cursor..cursor + take].to_vec());
        cursor += take;
    }
    parts
}
