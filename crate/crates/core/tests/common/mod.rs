//! Brute-force reference implementations and data generators shared by the
//! integration and acceptance tests.
#![allow(dead_code)]

use radsurv::radiomics::{DiscretizedVolume, TextureKind, TextureMatrix};
use radsurv::survival::Outcome;
use radsurv::volume::Geometry;
use radsurv::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:03}")).collect()
}

// ------------------------------------------------------------ survival

/// `-(1/N_E) Σ_events (h_i - ln Σ_{T_j >= T_i} exp h_j)` by direct double loop.
pub fn cox_loss(h: &[f64], o: &[Outcome]) -> f64 {
    let ne = o.iter().filter(|x| x.event).count() as f64;
    let mut total = 0.0;
    for i in 0..o.len() {
        if o[i].event {
            let s: f64 = (0..o.len()).filter(|&j| o[j].time >= o[i].time).map(|j| h[j].exp()).sum();
            total += h[i] - s.ln();
        }
    }
    -total / ne
}

/// Central finite differences of [`cox_loss`]-like functions.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += step;
            m[k] -= step;
            (f(&p) - f(&m)) / (2.0 * step)
        })
        .collect()
}

/// Harrell's C by enumerating every ordered pair.
pub fn brute_cindex(risk: &[f64], o: &[Outcome]) -> Option<f64> {
    let (mut comparable, mut score) = (0u64, 0u64);
    for i in 0..o.len() {
        for j in 0..o.len() {
            if i != j && o[i].event && o[i].time < o[j].time {
                comparable += 2;
                score += if risk[i] > risk[j] {
                    2
                } else if risk[i] == risk[j] {
                    1
                } else {
                    0
                };
            }
        }
    }
    (comparable > 0).then(|| (score as f64 / 2.0 + 0.0) / (comparable as f64 / 2.0))
}

/// Minimizes a 1-D function on a coarse grid, then on a fine grid around the best point.
pub fn grid_minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let coarse = 1e-2;
    let best = (0..=((hi - lo) / coarse) as usize)
        .map(|i| lo + i as f64 * coarse)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let fine = 1e-6;
    (0..=(4.0 * coarse / fine) as usize)
        .map(|i| best - 2.0 * coarse + i as f64 * fine)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}

/// 2-D version of [`grid_minimize_1d`] with a final resolution of `fine`.
pub fn grid_minimize_2d(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, fine: f64) -> (f64, f64) {
    let mut center = (0.5 * (lo + hi), 0.5 * (lo + hi));
    let mut half = 0.5 * (hi - lo);
    let mut step = 0.02 * (hi - lo);
    loop {
        let n = (2.0 * half / step).round() as i64;
        let mut best = (f64::INFINITY, center);
        for a in 0..=n {
            for b in 0..=n {
                let p = (center.0 - half + a as f64 * step, center.1 - half + b as f64 * step);
                let v = f(p.0, p.1);
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
        center = best.1;
        if step <= fine {
            return center;
        }
        half = 2.0 * step;
        step = (step / 10.0).max(fine);
    }
}

/// Exponential event times with hazard `exp(x·beta)` and independent
/// uniform censoring on `[0, censor_max]`.
pub fn simulate_cox(n: usize, beta: &[f64], censor_max: f64, seed: u64) -> (FeatureMatrix, Vec<Outcome>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| beta.iter().map(|_| rng.sample(normal)).collect())
        .collect();
    let outcomes = rows
        .iter()
        .map(|r| {
            let eta: f64 = r.iter().zip(beta).map(|(x, b)| x * b).sum();
            let t = rng.sample::<f64, _>(rand_distr::Exp1) / eta.exp();
            let c = rng.random_range(0.0..censor_max);
            Outcome::new(t.min(c).max(1e-12), t <= c).unwrap()
        })
        .collect();
    let names = (0..beta.len()).map(|j| format!("x{j}")).collect();
    (FeatureMatrix::from_rows(ids(n), names, &rows).unwrap(), outcomes)
}

pub fn random_outcomes(rng: &mut ChaCha8Rng, n: usize, max_time: u32) -> Vec<Outcome> {
    loop {
        let o: Vec<Outcome> = (0..n)
            .map(|_| Outcome::new(rng.random_range(1..=max_time) as f64, rng.random_bool(0.6)).unwrap())
            .collect();
        if o.iter().any(|x| x.event) {
            return o;
        }
    }
}

// ------------------------------------------------------------ texture

/// Random levels in `0..=ng` (0 = outside the region) with at least two in-region voxels.
pub fn random_levels(rng: &mut ChaCha8Rng, dims: [usize; 3], ng: u32) -> DiscretizedVolume {
    let g = Geometry::unit(dims).unwrap();
    loop {
        let levels: Vec<u32> = (0..g.len()).map(|_| rng.random_range(0..=ng)).collect();
        if levels.iter().filter(|&&l| l > 0).count() >= 2 {
            return DiscretizedVolume::from_levels(g, levels).unwrap();
        }
    }
}

struct Grid<'a> {
    dims: [usize; 3],
    levels: &'a [u32],
}

impl Grid<'_> {
    fn new(d: &DiscretizedVolume) -> Grid<'_> {
        Grid {
            dims: d.geometry().dims,
            levels: d.levels(),
        }
    }

    fn at(&self, p: [i64; 3]) -> u32 {
        if (0..3).any(|a| p[a] < 0 || p[a] >= self.dims[a] as i64) {
            return 0;
        }
        let [x, y, z] = p.map(|v| v as usize);
        self.levels[x + self.dims[0] * (y + self.dims[1] * z)]
    }

    /// In-region voxel positions in storage order.
    fn region(&self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    let p = [x as i64, y as i64, z as i64];
                    if self.at(p) > 0 {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

fn all_offsets() -> Vec<[i64; 3]> {
    let mut v = Vec::new();
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    v.push([dx, dy, dz]);
                }
            }
        }
    }
    v
}

/// One representative per opposite pair of offsets.
fn half_offsets() -> Vec<[i64; 3]> {
    all_offsets()
        .into_iter()
        .filter(|d| (d[2], d[1], d[0]) > (0, 0, 0))
        .collect()
}

fn add(p: [i64; 3], d: [i64; 3], s: i64) -> [i64; 3] {
    [p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]]
}

fn matrix(kind: TextureKind, rows: usize, cols: usize, entries: Vec<f64>, d: &DiscretizedVolume, directions: usize) -> TextureMatrix {
    TextureMatrix {
        kind,
        rows,
        cols,
        entries,
        ng: d.ng(),
        voxels: d.count(),
        directions,
    }
}

/// Co-occurrences counted from every in-region voxel towards all 26 neighbours.
pub fn oracle_glcm(d: &DiscretizedVolume) -> TextureMatrix {
    let g = Grid::new(d);
    let ng = d.ng() as usize;
    let mut e = vec![0.0; ng * ng];
    for p in g.region() {
        for off in all_offsets() {
            let b = g.at(add(p, off, 1));
            if b > 0 {
                e[(g.at(p) as usize - 1) * ng + b as usize - 1] += 1.0;
            }
        }
    }
    matrix(TextureKind::Glcm, ng, ng, e, d, 13)
}

/// Every voxel measures the maximal run through it in each direction; a run
/// of length L is seen by its L voxels, so counts are divided by L at the end.
pub fn oracle_glrlm(d: &DiscretizedVolume) -> TextureMatrix {
    let g = Grid::new(d);
    let ng = d.ng() as usize;
    let max = *g.dims.iter().max().unwrap();
    let mut seen = vec![0u64; ng * max];
    for off in half_offsets() {
        for p in g.region() {
            let l = g.at(p);
            let mut len = 1;
            for s in [1, -1] {
                let mut k = 1;
                while g.at(add(p, off, s * k)) == l {
                    len += 1;
                    k += 1;
                }
            }
            seen[(l as usize - 1) * max + len - 1] += 1;
        }
    }
    let longest = (0..max).rev().find(|&c| (0..ng).any(|r| seen[r * max + c] > 0)).unwrap() + 1;
    let mut e = Vec::with_capacity(ng * longest);
    for r in 0..ng {
        for c in 0..longest {
            let v = seen[r * max + c];
            assert_eq!(v % (c as u64 + 1), 0);
            e.push((v / (c as u64 + 1)) as f64);
        }
    }
    matrix(TextureKind::Glrlm, ng, longest, e, d, 13)
}

/// Zones by union-find over every pair of same-level voxels at Chebyshev distance 1.
pub fn oracle_glszm(d: &DiscretizedVolume) -> TextureMatrix {
    let g = Grid::new(d);
    let ng = d.ng() as usize;
    let pts = g.region();
    let mut parent: Vec<usize> = (0..pts.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let cheb = (0..3).map(|k| (pts[a][k] - pts[b][k]).abs()).max().unwrap();
            if cheb == 1 && g.at(pts[a]) == g.at(pts[b]) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut sizes = std::collections::BTreeMap::<usize, (u32, usize)>::new();
    for a in 0..pts.len() {
        let r = find(&mut parent, a);
        let entry = sizes.entry(r).or_insert((g.at(pts[a]), 0));
        entry.1 += 1;
    }
    let largest = sizes.values().map(|z| z.1).max().unwrap();
    let mut e = vec![0.0; ng * largest];
    for (level, size) in sizes.values() {
        e[(*level as usize - 1) * largest + size - 1] += 1.0;
    }
    matrix(TextureKind::Glszm, ng, largest, e, d, 1)
}

/// Neighbourhoods found by scanning the whole region for voxels at Chebyshev distance 1.
pub fn oracle_ngtdm(d: &DiscretizedVolume) -> TextureMatrix {
    let g = Grid::new(d);
    let ng = d.ng() as usize;
    let pts = g.region();
    let mut e = vec![0.0; ng * 2];
    for p in &pts {
        let (mut sum, mut count) = (0u64, 0u64);
        for q in &pts {
            let cheb = (0..3).map(|k| (p[k] - q[k]).abs()).max().unwrap();
            if cheb == 1 {
                sum += g.at(*q) as u64;
                count += 1;
            }
        }
        if count > 0 {
            let l = g.at(*p);
            e[(l as usize - 1) * 2] += 1.0;
            e[(l as usize - 1) * 2 + 1] += (l as f64 - sum as f64 / count as f64).abs();
        }
    }
    matrix(TextureKind::Ngtdm, ng, 2, e, d, 26)
}

/// Analytic `∂loss/∂h_k` written directly from the risk-set sums.
pub fn cox_gradient(h: &[f64], o: &[Outcome]) -> Vec<f64> {
    let ne = o.iter().filter(|x| x.event).count() as f64;
    (0..o.len())
        .map(|k| {
            let mut g = if o[k].event { 1.0 } else { 0.0 };
            for i in 0..o.len() {
                if o[i].event && o[k].time >= o[i].time {
                    let s: f64 = (0..o.len()).filter(|&j| o[j].time >= o[i].time).map(|j| h[j].exp()).sum();
                    g -= h[k].exp() / s;
                }
            }
            -g / ne
        })
        .collect()
}
