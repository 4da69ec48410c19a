use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cox::{standardize_design, CoxModel, FitDiagnostics};
use super::loss::{beta_gradient, beta_loss};
use super::{check_aligned, Outcome};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const DEFAULT_TARGET_K: usize = 7;
/// Convergence threshold on `max |Δβ|` between proximal steps.
pub const LASSO_TOL: f64 = 1e-7;
/// Slack allowed in the reported KKT conditions.
const KKT_TOL: f64 = 1e-5;
/// Slack required internally before declaring convergence.
const KKT_TARGET: f64 = 1e-6;
const MAX_ITER: usize = 200_000;
const GRID_LEN: usize = 100;
const GRID_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    /// Coefficients on z-scored features.
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// Largest KKT violation at the solution.
    pub kkt_violation: f64,
}

impl PathPoint {
    pub fn active(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub feature_names: Vec<String>,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub points: Vec<PathPoint>,
}

impl LassoPath {
    /// The fitted model at one path point.
    pub fn model(&self, point: usize) -> CoxModel {
        let pt = &self.points[point];
        CoxModel {
            feature_names: self.feature_names.clone(),
            beta: pt.beta.clone(),
            feature_means: self.feature_means.clone(),
            feature_stds: self.feature_stds.clone(),
            lambda: pt.lambda,
            diagnostics: FitDiagnostics {
                iterations: pt.iterations,
                gradient_norm: pt.kkt_violation,
                monotone: false,
            },
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn kkt_violation(beta: &DVector<f64>, grad: &DVector<f64>, lambda: f64) -> f64 {
    beta.iter()
        .zip(grad.iter())
        .map(|(&b, &g)| {
            if b == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

struct Solver<'a> {
    z: &'a DMatrix<f64>,
    outcomes: &'a [Outcome],
    /// Running estimate of the gradient's Lipschitz constant.
    lipschitz: f64,
}

impl Solver<'_> {
    fn objective(&self, beta: &DVector<f64>, lambda: f64) -> f64 {
        beta_loss(self.z, beta, self.outcomes) + lambda * beta.lp_norm(1)
    }

    /// Accelerated proximal gradient with backtracking and adaptive restart.
    fn solve(&mut self, start: DVector<f64>, lambda: f64) -> Result<PathPoint> {
        let mut beta = start;
        let mut y = beta.clone();
        let mut theta: f64 = 1.0;
        let mut obj = self.objective(&beta, lambda);
        for iter in 1..=MAX_ITER {
            let (fy, gy) = beta_gradient(self.z, &y, self.outcomes);
            let next = loop {
                let step = 1.0 / self.lipschitz;
                let cand = (&y - &gy * step).map(|v| soft_threshold(v, lambda * step));
                let d = &cand - &y;
                let bound = fy + gy.dot(&d) + 0.5 * self.lipschitz * d.norm_squared();
                if beta_loss(self.z, &cand, self.outcomes) <= bound + 1e-14 * fy.abs().max(1.0) {
                    break cand;
                }
                self.lipschitz *= 2.0;
            };
            let next_obj = self.objective(&next, lambda);
            if next_obj > obj && theta > 1.0 {
                // momentum overshot: restart from the last iterate
                theta = 1.0;
                y = beta.clone();
                continue;
            }
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let delta = (&next - &beta).amax();
            y = &next + (&next - &beta) * ((theta - 1.0) / theta_next);
            beta = next;
            obj = next_obj;
            theta = theta_next;
            if delta < LASSO_TOL {
                let (_, g) = beta_gradient(self.z, &beta, self.outcomes);
                let kkt = kkt_violation(&beta, &g, lambda);
                if kkt <= KKT_TARGET {
                    self.lipschitz *= 0.5;
                    return Ok(PathPoint {
                        lambda,
                        beta: beta.iter().copied().collect(),
                        iterations: iter,
                        kkt_violation: kkt,
                    });
                }
                // stalled short of optimality: drop the momentum and keep going
                theta = 1.0;
                y = beta.clone();
            }
        }
        let (_, g) = beta_gradient(self.z, &beta, self.outcomes);
        let kkt = kkt_violation(&beta, &g, lambda);
        if kkt <= KKT_TOL {
            return Ok(PathPoint {
                lambda,
                beta: beta.iter().copied().collect(),
                iterations: MAX_ITER,
                kkt_violation: kkt,
            });
        }
        Err(Error::NoConvergence {
            iterations: MAX_ITER,
            gradient_norm: kkt,
        })
    }
}

/// Smallest penalty at which every coefficient is zero: `max_j |∂loss/∂β_j(0)|`
/// on z-scored features.
pub fn lambda_max(x: &FeatureMatrix, outcomes: &[Outcome]) -> Result<f64> {
    check_aligned(x.nrows(), outcomes)?;
    let (z, _, _) = standardize_design(x)?;
    Ok(beta_gradient(&z, &DVector::zeros(z.ncols()), outcomes).1.amax())
}

/// `len` log-spaced values from `max` down to `max * ratio`.
pub fn lambda_grid(max: f64, ratio: f64, len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![max];
    }
    (0..len)
        .map(|i| max * ratio.powf(i as f64 / (len - 1) as f64))
        .collect()
}

/// L1-penalized Cox fits along a strictly decreasing, non-negative penalty sequence,
/// each warm-started from the previous solution.
pub fn lasso_cox_path(x: &FeatureMatrix, outcomes: &[Outcome], lambdas: &[f64]) -> Result<LassoPath> {
    check_aligned(x.nrows(), outcomes)?;
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("penalties must be finite, non-negative and strictly decreasing"));
    }
    let (z, means, stds) = standardize_design(x)?;
    let mut points = Vec::with_capacity(lambdas.len());
    solve_path(&z, outcomes, lambdas, |pt| {
        points.push(pt);
        true
    })?;
    Ok(LassoPath {
        feature_names: x.names().to_vec(),
        feature_means: means,
        feature_stds: stds,
        points,
    })
}

/// Runs the path, handing each solution to `visit`; stops early when it returns false.
fn solve_path(
    z: &DMatrix<f64>,
    outcomes: &[Outcome],
    lambdas: &[f64],
    mut visit: impl FnMut(PathPoint) -> bool,
) -> Result<()> {
    let n = z.nrows() as f64;
    // 0.25·max row norm² bounds the curvature of the averaged loss for one event;
    // start below and let backtracking grow it.
    let mut solver = Solver {
        z,
        outcomes,
        lipschitz: (z.norm_squared() / n).max(1e-6) * 0.25,
    };
    let mut beta = DVector::zeros(z.ncols());
    for &lambda in lambdas {
        let pt = solver.solve(beta.clone(), lambda)?;
        beta = DVector::from_column_slice(&pt.beta);
        if !visit(pt) {
            break;
        }
    }
    Ok(())
}

/// Outcome of penalty-path feature selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Selected feature names, strongest first.
    pub names: Vec<String>,
    /// Column indices into the input matrix, aligned with `names`.
    pub indices: Vec<usize>,
    /// Penalty at which the selection was taken.
    pub lambda: f64,
    pub lambda_max: f64,
    /// Active-set size before truncation.
    pub active: usize,
    /// False when no penalty on the grid reached the requested support size.
    pub reached_target: bool,
}

/// Walks 100 log-spaced penalties from `λ_max` down to `1e-3·λ_max` and stops at
/// the first one whose active set has at least `target_k` features, keeping the
/// `target_k` largest `|β|` (ties broken by column order). Constant columns are
/// never selected.
pub fn select_features(x: &FeatureMatrix, outcomes: &[Outcome], target_k: usize) -> Result<Selection> {
    check_aligned(x.nrows(), outcomes)?;
    if target_k == 0 {
        return Err(Error::invalid("target support size must be positive"));
    }
    let varying: Vec<usize> = (0..x.ncols())
        .filter(|&j| {
            let (m, s) = crate::matrix::column_mean_std(x.values(), j);
            !crate::matrix::is_constant(m, s)
        })
        .collect();
    if varying.is_empty() {
        return Err(Error::AllColumnsConstant);
    }
    let sub = x.select_columns(&varying);
    let (z, _, _) = standardize_design(&sub)?;
    let lmax = beta_gradient(&z, &DVector::zeros(z.ncols()), outcomes).1.amax();
    if lmax <= 0.0 {
        return Err(Error::invalid("no feature is associated with the outcome at beta = 0"));
    }
    let grid = lambda_grid(lmax, GRID_RATIO, GRID_LEN);
    let mut best: Option<PathPoint> = None;
    let mut reached = false;
    solve_path(&z, outcomes, &grid, |pt| {
        let size = pt.active().len();
        if best.as_ref().is_none_or(|b| size > b.active().len()) {
            best = Some(pt);
        }
        reached = size >= target_k;
        !reached
    })?;
    let pt = best.expect("grid is non-empty");
    let mut active = pt.active();
    let support = active.len();
    active.sort_by(|&a, &b| pt.beta[b].abs().total_cmp(&pt.beta[a].abs()).then(a.cmp(&b)));
    active.truncate(target_k);
    let indices: Vec<usize> = active.iter().map(|&j| varying[j]).collect();
    Ok(Selection {
        names: indices.iter().map(|&j| x.names()[j].clone()).collect(),
        indices,
        lambda: pt.lambda,
        lambda_max: lmax,
        active: support,
        reached_target: reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simulate(n: usize, p: usize, signal: &[(usize, f64)], seed: u64) -> (FeatureMatrix, Vec<Outcome>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.7..1.7)).collect()).collect();
        let outcomes = rows
            .iter()
            .map(|r| {
                let eta: f64 = signal.iter().map(|&(j, b)| b * r[j]).sum();
                let u: f64 = rng.random_range(1e-12..1.0);
                let t = -u.ln() / eta.exp();
                let c = rng.random_range(0.0..3.0);
                Outcome::new(t.min(c).max(1e-9), t <= c).unwrap()
            })
            .collect();
        let names = (0..p).map(|j| format!("f{j}")).collect();
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        (FeatureMatrix::from_rows(ids, names, &rows).unwrap(), outcomes)
    }

    #[test]
    fn zero_above_lambda_max() {
        let (x, o) = simulate(80, 5, &[(0, 1.0)], 1);
        let lmax = lambda_max(&x, &o).unwrap();
        let path = lasso_cox_path(&x, &o, &[lmax * 1.5, lmax]).unwrap();
        assert!(path.points.iter().all(|p| p.beta.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn kkt_holds_along_path() {
        let (x, o) = simulate(120, 8, &[(1, 1.2), (4, -0.8)], 2);
        let lmax = lambda_max(&x, &o).unwrap();
        let path = lasso_cox_path(&x, &o, &lambda_grid(lmax, 0.01, 20)).unwrap();
        let (z, _, _) = standardize_design(&x).unwrap();
        for pt in &path.points {
            let g = beta_gradient(&z, &DVector::from_column_slice(&pt.beta), &o).1;
            for (j, &b) in pt.beta.iter().enumerate() {
                if b == 0.0 {
                    assert!(g[j].abs() <= pt.lambda + KKT_TOL);
                } else {
                    assert!((g[j] + pt.lambda * b.signum()).abs() <= KKT_TOL);
                }
            }
        }
        let sizes: Vec<usize> = path.points.iter().map(|p| p.active().len()).collect();
        assert_eq!(sizes[0], 0);
        assert!(*sizes.last().unwrap() >= 2);
    }

    #[test]
    fn planted_support_recovered() {
        let (x, o) = simulate(400, 12, &[(0, 1.5), (3, -1.5)], 3);
        let s = select_features(&x, &o, 2).unwrap();
        assert!(s.reached_target);
        let mut idx = s.indices.clone();
        idx.sort();
        assert_eq!(idx, vec![0, 3]);
    }

    #[test]
    fn unreachable_target_flags() {
        let (x, o) = simulate(60, 3, &[(0, 1.0)], 4);
        let s = select_features(&x, &o, 7).unwrap();
        assert!(!s.reached_target);
        assert!(s.indices.len() <= 3);
    }

    #[test]
    fn unpenalized_endpoint_matches_newton() {
        let (x, o) = simulate(150, 3, &[(0, 1.0), (2, -0.5)], 5);
        let lmax = lambda_max(&x, &o).unwrap();
        let path = lasso_cox_path(&x, &o, &[lmax * 0.1, 0.0]).unwrap();
        let newton = super::super::fit_coxph(&x, &o).unwrap();
        for (a, b) in path.points[1].beta.iter().zip(&newton.beta) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_penalties() {
        let (x, o) = simulate(20, 2, &[], 6);
        assert!(lasso_cox_path(&x, &o, &[0.1, 0.2]).is_err());
        assert!(lasso_cox_path(&x, &o, &[-1.0]).is_err());
    }
}
