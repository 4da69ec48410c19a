mod common;

use common::*;
use nalgebra::DMatrix;
use radsurv::survival::{fit_coxph, lambda_max, lasso_cox_path, predict_risk};

fn zscored(x: &radsurv::FeatureMatrix) -> DMatrix<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    let mut z = x.values().clone();
    for j in 0..p {
        let mean = z.column(j).sum() / n as f64;
        let sd = (z.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        z.column_mut(j).apply(|v| *v = (*v - mean) / sd);
    }
    z
}

#[test]
fn two_feature_lasso_matches_grid_search() {
    for seed in 0..3 {
        let (x, o) = simulate_cox(80, &[0.9, -0.4], 2.0, 40 + seed);
        let z = zscored(&x);
        let lambda = 0.3 * lambda_max(&x, &o).unwrap();
        let path = lasso_cox_path(&x, &o, &[lambda]).unwrap();
        let objective = |a: f64, b: f64| {
            let h: Vec<f64> = (0..80).map(|i| a * z[(i, 0)] + b * z[(i, 1)]).collect();
            cox_loss(&h, &o) + lambda * (a.abs() + b.abs())
        };
        let (a, b) = grid_minimize_2d(objective, -3.0, 3.0, 1e-4);
        let beta = &path.points[0].beta;
        assert!((beta[0] - a).abs() < 1e-3 && (beta[1] - b).abs() < 1e-3, "{beta:?} vs ({a}, {b})");
    }
}

#[test]
fn zero_signal_estimates_stay_near_zero() {
    let (x, o) = simulate_cox(1000, &[0.0, 0.0, 0.0], 2.0, 77);
    let model = fit_coxph(&x, &o).unwrap();
    let beta = model.raw_coefficients();
    let events = o.iter().filter(|v| v.event).count() as f64;
    let total_loss = |b: &[f64]| {
        let h: Vec<f64> = (0..x.nrows()).map(|i| (0..3).map(|j| b[j] * x.values()[(i, j)]).sum()).collect();
        events * cox_loss(&h, &o)
    };
    for j in 0..3 {
        let step = 1e-3;
        let at = |d: f64| {
            let mut b = beta.clone();
            b[j] += d;
            total_loss(&b)
        };
        let information = (at(step) - 2.0 * at(0.0) + at(-step)) / (step * step);
        let se = information.recip().sqrt();
        assert!(beta[j].abs() < 3.0 * se, "beta[{j}] = {} with se {se}", beta[j]);
    }
}

#[test]
fn fitted_risk_ranks_simulated_hazard() {
    let (x, o) = simulate_cox(400, &[1.2, 0.0, -0.7], 3.0, 5);
    let model = fit_coxph(&x, &o).unwrap();
    let risk = predict_risk(&model, &x).unwrap();
    let truth: Vec<f64> = (0..400).map(|i| 1.2 * x.values()[(i, 0)] - 0.7 * x.values()[(i, 2)]).collect();
    let c_fit = brute_cindex(&risk, &o).unwrap();
    let c_true = brute_cindex(&truth, &o).unwrap();
    assert!((c_fit - c_true).abs() < 0.02, "fit {c_fit} vs truth {c_true}");
}
