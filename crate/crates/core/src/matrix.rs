//! Subjects x named features, plus train-fold standardization.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    subject_ids: Vec<String>,
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(subject_ids: Vec<String>, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != subject_ids.len() || values.ncols() != names.len() {
            return Err(Error::invalid(format!(
                "matrix is {}x{} but there are {} subjects and {} names",
                values.nrows(),
                values.ncols(),
                subject_ids.len(),
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::invalid(format!("duplicate feature name {dup:?}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(FeatureMatrix {
            subject_ids,
            names,
            values,
        })
    }

    pub fn from_rows(subject_ids: Vec<String>, names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::LengthMismatch {
                expected: p,
                found: r.len(),
            });
        }
        let values = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(subject_ids, names, values)
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            subject_ids: rows.iter().map(|&r| self.subject_ids[r].clone()).collect(),
            names: self.names.clone(),
            values: self.values.select_rows(rows),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            subject_ids: self.subject_ids.clone(),
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            values: self.values.select_columns(cols),
        }
    }

    pub fn select_named(&self, names: &[String]) -> Result<FeatureMatrix> {
        let cols = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    /// Rows reordered to follow `ids`.
    pub fn select_subjects(&self, ids: &[String]) -> Result<FeatureMatrix> {
        let rows = ids
            .iter()
            .map(|id| {
                self.subject_ids
                    .iter()
                    .position(|s| s == id)
                    .ok_or_else(|| Error::invalid(format!("subject {id:?} not in feature matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_rows(&rows))
    }

    /// Side-by-side concatenation; both matrices must list the same subjects in the same order.
    pub fn hconcat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.subject_ids != other.subject_ids {
            return Err(Error::invalid("hconcat needs identical subject order"));
        }
        let (n, p, q) = (self.nrows(), self.ncols(), other.ncols());
        let values = DMatrix::from_fn(n, p + q, |i, j| {
            if j < p {
                self.values[(i, j)]
            } else {
                other.values[(i, j - p)]
            }
        });
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        FeatureMatrix::new(self.subject_ids.clone(), names, values)
    }

    /// CSV with a `subject_id` column followed by the feature columns.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let mut header = vec!["subject_id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.nrows() {
            let mut rec = vec![self.subject_ids[i].clone()];
            rec.extend(self.values.row(i).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let header = r.headers()?.clone();
        if header.get(0) != Some("subject_id") {
            return Err(Error::Manifest(format!("{}: first column must be subject_id", path.display())));
        }
        let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            ids.push(rec.get(0).unwrap_or_default().to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Manifest(format!("{}: bad number {s:?}", path.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        FeatureMatrix::from_rows(ids, names, &rows)
    }
}

/// Column means and population standard deviations fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns dropped at fit time because their variance was zero.
    pub dropped: Vec<String>,
}

/// Relative variance floor below which a column counts as constant.
const CONSTANT_TOL: f64 = 1e-12;

pub(crate) fn column_mean_std(values: &DMatrix<f64>, j: usize) -> (f64, f64) {
    let col = values.column(j);
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub(crate) fn is_constant(mean: f64, std: f64) -> bool {
    !(std > CONSTANT_TOL * mean.abs().max(1.0))
}

impl Standardizer {
    /// Fits on `train`, dropping zero-variance columns.
    pub fn fit(train: &FeatureMatrix) -> Result<Standardizer> {
        let mut s = Standardizer {
            names: Vec::new(),
            means: Vec::new(),
            stds: Vec::new(),
            dropped: Vec::new(),
        };
        for (j, name) in train.names.iter().enumerate() {
            let (mean, std) = column_mean_std(&train.values, j);
            if train.nrows() == 0 || is_constant(mean, std) {
                s.dropped.push(name.clone());
            } else {
                s.names.push(name.clone());
                s.means.push(mean);
                s.stds.push(std);
            }
        }
        if s.names.is_empty() {
            return Err(Error::AllColumnsConstant);
        }
        Ok(s)
    }

    /// Applies the fitted parameters to the kept columns of `x`, looked up by name.
    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let cols = self
            .names
            .iter()
            .map(|n| x.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        let values = DMatrix::from_fn(x.nrows(), cols.len(), |i, c| {
            (x.values[(i, cols[c])] - self.means[c]) / self.stds[c]
        });
        Ok(FeatureMatrix {
            subject_ids: x.subject_ids.clone(),
            names: self.names.clone(),
            values,
        })
    }
}
