use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::loss::{beta_derivatives, beta_gradient, beta_loss};
use super::{check_aligned, Outcome};
use crate::error::{Error, Result};
use crate::matrix::{column_mean_std, is_constant, FeatureMatrix};

pub const NEWTON_MAX_ITER: usize = 100;
/// Convergence threshold on `max |Δβ|` between Newton iterations.
pub const NEWTON_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 60;
/// Relative objective decrease below which an iteration counts as stalled.
const STALL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// The objective stopped decreasing while coefficients were still moving:
    /// the partial likelihood is monotone and some coefficient is unbounded.
    #[serde(default)]
    pub monotone: bool,
}

/// A fitted Cox model. Coefficients act on z-scored features; the stored means
/// and standard deviations map raw feature values onto that scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub feature_names: Vec<String>,
    pub beta: Vec<f64>,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    /// L1 penalty the coefficients were fitted with (0 for an unpenalized fit).
    pub lambda: f64,
    pub diagnostics: FitDiagnostics,
}

impl CoxModel {
    /// A model without covariates: every subject gets risk 0.
    pub fn null() -> CoxModel {
        CoxModel {
            feature_names: Vec::new(),
            beta: Vec::new(),
            feature_means: Vec::new(),
            feature_stds: Vec::new(),
            lambda: 0.0,
            diagnostics: FitDiagnostics {
                iterations: 0,
                gradient_norm: 0.0,
                monotone: false,
            },
        }
    }

    /// Coefficients on the original feature scale, `beta_j / sd_j`.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        self.beta.iter().zip(&self.feature_stds).map(|(b, s)| b / s).collect()
    }

    /// Linear predictor for one subject's raw features, ordered as `feature_names`.
    pub fn linear_predictor(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.beta.len() {
            return Err(Error::LengthMismatch {
                expected: self.beta.len(),
                found: raw.len(),
            });
        }
        Ok(raw
            .iter()
            .enumerate()
            .map(|(j, v)| self.beta[j] * (v - self.feature_means[j]) / self.feature_stds[j])
            .sum())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<CoxModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Z-scores every column, failing on the first constant one.
pub(crate) fn standardize_design(x: &FeatureMatrix) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    let mut means = Vec::with_capacity(x.ncols());
    let mut stds = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let (m, s) = column_mean_std(x.values(), j);
        if is_constant(m, s) {
            return Err(Error::ConstantColumn(x.names()[j].clone()));
        }
        means.push(m);
        stds.push(s);
    }
    let z = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x.values()[(i, j)] - means[j]) / stds[j]);
    Ok((z, means, stds))
}

fn newton_direction(grad: &DVector<f64>, hess: DMatrix<f64>) -> DVector<f64> {
    let scale = hess.diagonal().amax().max(1e-300);
    let mut ridge = 0.0;
    loop {
        let mut h = hess.clone();
        for d in 0..h.nrows() {
            h[(d, d)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            return -ch.solve(grad);
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 10.0 };
    }
}

/// Unpenalized Cox proportional hazards fit by damped Newton-Raphson.
pub fn fit_coxph(x: &FeatureMatrix, outcomes: &[Outcome]) -> Result<CoxModel> {
    check_aligned(x.nrows(), outcomes)?;
    if x.ncols() == 0 {
        return Ok(CoxModel::null());
    }
    let (z, means, stds) = standardize_design(x)?;
    let p = z.ncols();
    let mut beta = DVector::<f64>::zeros(p);
    let mut loss = beta_loss(&z, &beta, outcomes);
    for iter in 1..=NEWTON_MAX_ITER {
        let (_, grad, hess) = beta_derivatives(&z, &beta, outcomes);
        let dir = newton_direction(&grad, hess);
        let mut t = 1.0;
        let mut candidate = &beta + &dir;
        let mut cand_loss = beta_loss(&z, &candidate, outcomes);
        let mut halvings = 0;
        while !(cand_loss <= loss) && halvings < MAX_HALVINGS {
            t *= 0.5;
            candidate = &beta + &dir * t;
            cand_loss = beta_loss(&z, &candidate, outcomes);
            halvings += 1;
        }
        let step = (&candidate - &beta).amax();
        let stalled = !(loss - cand_loss > STALL_TOL * loss.abs().max(1.0));
        if cand_loss <= loss {
            beta = candidate;
            loss = cand_loss;
        }
        if step < NEWTON_TOL || stalled {
            let gradient_norm = beta_gradient(&z, &beta, outcomes).1.norm();
            return Ok(CoxModel {
                feature_names: x.names().to_vec(),
                beta: beta.iter().copied().collect(),
                feature_means: means,
                feature_stds: stds,
                lambda: 0.0,
                diagnostics: FitDiagnostics {
                    iterations: iter,
                    gradient_norm,
                    monotone: stalled && step > 1e-3,
                },
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        gradient_norm: beta_gradient(&z, &beta, outcomes).1.norm(),
    })
}

/// Linear predictor `h = β·z(x)` for every row, looking features up by name.
pub fn predict_risk(model: &CoxModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    let cols = model
        .feature_names
        .iter()
        .map(|n| x.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
        .collect::<Result<Vec<_>>>()?;
    (0..x.nrows())
        .map(|i| {
            let raw: Vec<f64> = cols.iter().map(|&c| x.values()[(i, c)]).collect();
            model.linear_predictor(&raw)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn binary_covariate_first_event_wins() {
        // events at t=1,2; the exposed subject fails first
        let x = FeatureMatrix::from_rows(ids(4), vec!["x".into()], &[vec![1.0], vec![0.0], vec![1.0], vec![0.0]])
            .unwrap();
        let o = [
            Outcome::new(1.0, true).unwrap(),
            Outcome::new(2.0, true).unwrap(),
            Outcome::new(3.0, false).unwrap(),
            Outcome::new(4.0, true).unwrap(),
        ];
        let m = fit_coxph(&x, &o).unwrap();
        assert!(m.beta[0] > 0.0);
        assert!(m.diagnostics.gradient_norm < 1e-6);
        let h = predict_risk(&m, &x).unwrap();
        assert!(h[0] > h[1]);
        assert_eq!(h[0], h[2]);
    }

    #[test]
    fn separable_data_runs_off_to_infinity() {
        let x = FeatureMatrix::from_rows(ids(4), vec!["x".into()], &[vec![4.0], vec![3.0], vec![2.0], vec![1.0]])
            .unwrap();
        let o: Vec<Outcome> = (1..=4).map(|t| Outcome::new(t as f64, true).unwrap()).collect();
        let m = fit_coxph(&x, &o).unwrap();
        assert!(m.diagnostics.monotone);
        assert!(m.beta[0] > 20.0, "{m:?}");
    }

    #[test]
    fn constant_column_rejected() {
        let x = FeatureMatrix::from_rows(ids(3), vec!["c".into()], &[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let o: Vec<Outcome> = (1..=3).map(|t| Outcome::new(t as f64, true).unwrap()).collect();
        assert!(matches!(fit_coxph(&x, &o), Err(Error::ConstantColumn(_))));
    }

    #[test]
    fn json_round_trip_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 60;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(0.0..5.0)]).collect();
        let o: Vec<Outcome> = rows
            .iter()
            .map(|r| Outcome::new((2.0 - r[0]) * rng.random_range(0.5..1.5), rng.random_bool(0.7)).unwrap())
            .collect();
        let names = vec!["a".to_string(), "b".to_string()];
        let x = FeatureMatrix::from_rows(ids(n), names.clone(), &rows).unwrap();
        let m = fit_coxph(&x, &o).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] * 1000.0 + 7.0, r[1]]).collect();
        let xs = FeatureMatrix::from_rows(ids(n), names, &scaled).unwrap();
        let ms = fit_coxph(&xs, &o).unwrap();
        for (a, b) in m.beta.iter().zip(&ms.beta) {
            assert!((a - b).abs() < 1e-8);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        m.write_json(&p).unwrap();
        assert_eq!(CoxModel::read_json(&p).unwrap(), m);
    }
}
