use nalgebra::{DMatrix, DVector};

use super::{check_aligned, event_count, Outcome};
use crate::error::Result;

/// Indices `j` with `T_j >= T_i`.
pub fn risk_set(outcomes: &[Outcome], i: usize) -> Vec<usize> {
    let t = outcomes[i].time;
    (0..outcomes.len()).filter(|&j| outcomes[j].time >= t).collect()
}

/// Subject indices sorted by time, latest first, grouped by equal time.
fn groups_descending(outcomes: &[Outcome]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| outcomes[b].time.total_cmp(&outcomes[a].time).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if outcomes[g[0]].time == outcomes[i].time => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Shifted risk-set sums `S_i = Σ_{j ∈ H(T_i)} exp(h_j - m)` per subject, with `m = max h`.
struct RiskSums {
    shift: f64,
    sums: Vec<f64>,
    groups: Vec<Vec<usize>>,
}

fn risk_sums(h: &[f64], outcomes: &[Outcome]) -> RiskSums {
    let shift = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let groups = groups_descending(outcomes);
    let mut sums = vec![0.0; h.len()];
    let mut running = 0.0;
    for g in &groups {
        for &j in g {
            running += (h[j] - shift).exp();
        }
        for &j in g {
            sums[j] = running;
        }
    }
    RiskSums { shift, sums, groups }
}

/// Negative log partial likelihood averaged over events:
/// `-(1/N_E) Σ_{i: E_i=1} (h_i - log Σ_{j: T_j >= T_i} exp h_j)`.
pub fn cox_npll(h: &[f64], outcomes: &[Outcome]) -> Result<f64> {
    check_aligned(h.len(), outcomes)?;
    Ok(npll_unchecked(h, outcomes))
}

pub(crate) fn npll_unchecked(h: &[f64], outcomes: &[Outcome]) -> f64 {
    let rs = risk_sums(h, outcomes);
    let mut total = 0.0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.event {
            total += h[i] - rs.shift - rs.sums[i].ln();
        }
    }
    -total / event_count(outcomes) as f64
}

/// `∂loss/∂h_k = (1/N_E) [exp(h_k) Σ_{i: E_i=1, T_i <= T_k} 1/S_i - E_k]`.
pub fn cox_npll_gradient(h: &[f64], outcomes: &[Outcome]) -> Result<Vec<f64>> {
    check_aligned(h.len(), outcomes)?;
    Ok(gradient_unchecked(h, outcomes).1)
}

/// Loss and gradient in one pass.
pub(crate) fn gradient_unchecked(h: &[f64], outcomes: &[Outcome]) -> (f64, Vec<f64>) {
    let rs = risk_sums(h, outcomes);
    let ne = event_count(outcomes) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; h.len()];
    let mut cumulative = 0.0;
    for g in rs.groups.iter().rev() {
        for &i in g {
            if outcomes[i].event {
                cumulative += 1.0 / rs.sums[i];
                loss += h[i] - rs.shift - rs.sums[i].ln();
            }
        }
        for &k in g {
            let e = if outcomes[k].event { 1.0 } else { 0.0 };
            grad[k] = ((h[k] - rs.shift).exp() * cumulative - e) / ne;
        }
    }
    (-loss / ne, grad)
}

/// Loss, gradient and Hessian with respect to `beta` for the linear predictor `h = x·beta`.
pub(crate) fn beta_derivatives(x: &DMatrix<f64>, beta: &DVector<f64>, outcomes: &[Outcome]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = x.ncols();
    let h: Vec<f64> = (x * beta).iter().copied().collect();
    let shift = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ne = event_count(outcomes) as f64;
    let mut s0 = 0.0;
    let mut s1 = DVector::<f64>::zeros(p);
    let mut s2 = DMatrix::<f64>::zeros(p, p);
    let mut loss = 0.0;
    let mut grad = DVector::<f64>::zeros(p);
    let mut hess = DMatrix::<f64>::zeros(p, p);
    for g in groups_descending(outcomes) {
        for &j in &g {
            let w = (h[j] - shift).exp();
            let row = x.row(j).transpose();
            s0 += w;
            s1.axpy(w, &row, 1.0);
            s2.ger(w, &row, &row, 1.0);
        }
        for &i in &g {
            if !outcomes[i].event {
                continue;
            }
            let row = x.row(i).transpose();
            let mean = &s1 / s0;
            loss -= h[i] - shift - s0.ln();
            grad += &mean - &row;
            hess += &s2 / s0 - &mean * mean.transpose();
        }
    }
    (loss / ne, grad / ne, hess / ne)
}

/// Loss and gradient with respect to `beta`, O(n·p).
pub(crate) fn beta_gradient(x: &DMatrix<f64>, beta: &DVector<f64>, outcomes: &[Outcome]) -> (f64, DVector<f64>) {
    let h: Vec<f64> = (x * beta).iter().copied().collect();
    let (loss, gh) = gradient_unchecked(&h, outcomes);
    (loss, x.tr_mul(&DVector::from_vec(gh)))
}

pub(crate) fn beta_loss(x: &DMatrix<f64>, beta: &DVector<f64>, outcomes: &[Outcome]) -> f64 {
    let h: Vec<f64> = (x * beta).iter().copied().collect();
    npll_unchecked(&h, outcomes)
}
