//! Gray-level texture matrices (GLCM, GLRLM, GLSZM, NGTDM) and their features.
//!
//! All matrices are built over the in-mask region of a [`DiscretizedVolume`].
//! Directions are the 13 unique distance-1 offsets in 3D; GLCM counts both
//! orientations of each pair, GLRLM sums runs over the 13 directions, GLSZM
//! zones and NGTDM neighbourhoods use 26-connectivity.

use super::discretize::DiscretizedVolume;
use super::FeatureVector;
use crate::error::{Error, Result};

/// Denominators below this are treated as zero.
pub const EPS: f64 = 1e-12;
/// NGTDM coarseness reported when the neighbourhood differences vanish.
pub const COARSENESS_SENTINEL: f64 = 1e12;

pub const DIRECTIONS: [[isize; 3]; 13] = [
    [1, 0, 0],
    [-1, 1, 0],
    [0, 1, 0],
    [1, 1, 0],
    [-1, -1, 1],
    [0, -1, 1],
    [1, -1, 1],
    [-1, 0, 1],
    [0, 0, 1],
    [1, 0, 1],
    [-1, 1, 1],
    [0, 1, 1],
    [1, 1, 1],
];

pub const GLCM_NAMES: [&str; 8] = [
    "contrast",
    "correlation",
    "joint_energy",
    "joint_entropy",
    "idm",
    "cluster_shade",
    "cluster_prominence",
    "maximum_probability",
];

pub const GLRLM_NAMES: [&str; 11] = [
    "sre", "lre", "gln", "rln", "rp", "lglre", "hglre", "srlge", "srhge", "lrlge", "lrhge",
];

pub const GLSZM_NAMES: [&str; 11] = [
    "sae", "lae", "gln", "szn", "zp", "lgze", "hgze", "salge", "sahge", "lalge", "lahge",
];

pub const NGTDM_NAMES: [&str; 5] = ["coarseness", "contrast", "busyness", "complexity", "strength"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureKind {
    Glcm,
    Glrlm,
    Glszm,
    Ngtdm,
}

/// Dense row-major matrix of raw counts (or sums, for NGTDM).
///
/// Rows are gray levels `1..=ng` (row 0 is level 1). Columns are:
/// GLCM gray level, GLRLM run length, GLSZM zone size (column 0 is length/size 1),
/// NGTDM `[n_i, s_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureMatrix {
    pub kind: TextureKind,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
    pub ng: u32,
    /// Number of in-mask voxels the matrix was built from.
    pub voxels: usize,
    pub directions: usize,
}

impl TextureMatrix {
    fn zeros(kind: TextureKind, rows: usize, cols: usize, ng: u32, voxels: usize, directions: usize) -> Self {
        TextureMatrix {
            kind,
            rows,
            cols,
            entries: vec![0.0; rows * cols],
            ng,
            voxels,
            directions,
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    fn add(&mut self, r: usize, c: usize, v: f64) {
        self.entries[r * self.cols + c] += v;
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Entries divided by their total.
    pub fn normalized(&self) -> Vec<f64> {
        let t = self.total();
        self.entries.iter().map(|e| e / t).collect()
    }

    fn trim_cols(&mut self, cols: usize) {
        if cols == self.cols {
            return;
        }
        let mut e = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            e.extend_from_slice(&self.entries[r * self.cols..r * self.cols + cols]);
        }
        self.entries = e;
        self.cols = cols;
    }
}

fn neighbours26() -> impl Iterator<Item = [isize; 3]> {
    DIRECTIONS.iter().flat_map(|d| [*d, [-d[0], -d[1], -d[2]]])
}

// ---------------------------------------------------------------- GLCM

pub fn glcm_matrix(disc: &DiscretizedVolume) -> Result<TextureMatrix> {
    if disc.count() < 2 {
        return Err(Error::DegenerateRegion("GLCM needs at least 2 in-mask voxels".into()));
    }
    let g = disc.geometry();
    let ng = disc.ng() as usize;
    let mut m = TextureMatrix::zeros(TextureKind::Glcm, ng, ng, disc.ng(), disc.count(), DIRECTIONS.len());
    for idx in disc.region_indices() {
        let a = disc.level(idx) as usize;
        let at = g.coords(idx);
        for d in &DIRECTIONS {
            if let Some(n) = g.offset(at, *d) {
                let b = disc.level(n) as usize;
                if b > 0 {
                    m.add(a - 1, b - 1, 1.0);
                    m.add(b - 1, a - 1, 1.0);
                }
            }
        }
    }
    if m.total() == 0.0 {
        return Err(Error::DegenerateRegion("no in-mask voxel pair for GLCM".into()));
    }
    Ok(m)
}

pub fn glcm_features_from(m: &TextureMatrix) -> FeatureVector {
    let ng = m.rows;
    let p = m.normalized();
    let level = |r: usize| (r + 1) as f64;
    let mut mu = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            mu += level(i) * p[i * ng + j];
        }
    }
    let (mut var, mut cross) = (0.0, 0.0);
    let (mut contrast, mut energy, mut entropy, mut idm) = (0.0, 0.0, 0.0, 0.0);
    let (mut shade, mut prominence, mut max_p) = (0.0, 0.0, 0.0f64);
    for i in 0..ng {
        for j in 0..ng {
            let pij = p[i * ng + j];
            if pij == 0.0 {
                continue;
            }
            let (li, lj) = (level(i), level(j));
            let diff = li - lj;
            var += (li - mu) * (li - mu) * pij;
            cross += (li - mu) * (lj - mu) * pij;
            contrast += diff * diff * pij;
            energy += pij * pij;
            entropy -= pij * pij.log2();
            idm += pij / (1.0 + diff * diff);
            let s = li + lj - 2.0 * mu;
            shade += s.powi(3) * pij;
            prominence += s.powi(4) * pij;
            max_p = max_p.max(pij);
        }
    }
    let correlation = if var <= EPS { 1.0 } else { cross / var };
    FeatureVector::from_pairs(GLCM_NAMES.iter().copied().zip([
        contrast,
        correlation,
        energy,
        entropy.max(0.0),
        idm,
        shade,
        prominence,
        max_p,
    ]))
}

pub fn glcm_features(disc: &DiscretizedVolume) -> Result<FeatureVector> {
    Ok(glcm_features_from(&glcm_matrix(disc)?))
}

// ---------------------------------------------------------------- GLRLM

pub fn glrlm_matrix(disc: &DiscretizedVolume) -> Result<TextureMatrix> {
    if disc.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let g = disc.geometry();
    let ng = disc.ng() as usize;
    let max_len = g.dims.iter().copied().max().unwrap_or(1);
    let mut m = TextureMatrix::zeros(TextureKind::Glrlm, ng, max_len, disc.ng(), disc.count(), DIRECTIONS.len());
    let mut longest = 1;
    for idx in disc.region_indices() {
        let level = disc.level(idx);
        let at = g.coords(idx);
        for d in &DIRECTIONS {
            let back = [-d[0], -d[1], -d[2]];
            let starts_run = match g.offset(at, back) {
                Some(p) => disc.level(p) != level,
                None => true,
            };
            if !starts_run {
                continue;
            }
            let mut len = 1usize;
            let mut cur = at;
            while let Some(n) = g.offset(cur, *d) {
                if disc.level(n) != level {
                    break;
                }
                len += 1;
                cur = g.coords(n);
            }
            longest = longest.max(len);
            m.add(level as usize - 1, len - 1, 1.0);
        }
    }
    m.trim_cols(longest);
    Ok(m)
}

/// Shared emphasis features of run-length and size-zone matrices.
/// Returns `[short, long, gln, length_nu, percentage, lg, hg, s_lg, s_hg, l_lg, l_hg]`.
fn emphasis_features(m: &TextureMatrix, percentage_denominator: f64) -> [f64; 11] {
    let total = m.total();
    let mut out = [0.0; 11];
    let mut col_sums = vec![0.0; m.cols];
    for r in 0..m.rows {
        let i = (r + 1) as f64;
        let i2 = i * i;
        let mut row_sum = 0.0;
        for c in 0..m.cols {
            let p = m.get(r, c);
            if p == 0.0 {
                continue;
            }
            let j = (c + 1) as f64;
            let j2 = j * j;
            row_sum += p;
            col_sums[c] += p;
            out[0] += p / j2;
            out[1] += p * j2;
            out[5] += p / i2;
            out[6] += p * i2;
            out[7] += p / (i2 * j2);
            out[8] += p * i2 / j2;
            out[9] += p * j2 / i2;
            out[10] += p * i2 * j2;
        }
        out[2] += row_sum * row_sum;
    }
    out[3] = col_sums.iter().map(|s| s * s).sum();
    for (k, v) in out.iter_mut().enumerate() {
        if k != 4 {
            *v /= total;
        }
    }
    out[4] = total / percentage_denominator;
    out
}

pub fn glrlm_features_from(m: &TextureMatrix) -> FeatureVector {
    let values = emphasis_features(m, (m.voxels * m.directions) as f64);
    FeatureVector::from_pairs(GLRLM_NAMES.iter().copied().zip(values))
}

pub fn glrlm_features(disc: &DiscretizedVolume) -> Result<FeatureVector> {
    Ok(glrlm_features_from(&glrlm_matrix(disc)?))
}

// ---------------------------------------------------------------- GLSZM

pub fn glszm_matrix(disc: &DiscretizedVolume) -> Result<TextureMatrix> {
    if disc.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let g = disc.geometry();
    let ng = disc.ng() as usize;
    let mut visited = vec![false; g.len()];
    let mut zones: Vec<(u32, usize)> = Vec::new();
    let mut stack = Vec::new();
    for start in disc.region_indices() {
        if visited[start] {
            continue;
        }
        let level = disc.level(start);
        visited[start] = true;
        stack.push(start);
        let mut size = 0usize;
        while let Some(idx) = stack.pop() {
            size += 1;
            let at = g.coords(idx);
            for d in neighbours26() {
                if let Some(n) = g.offset(at, d) {
                    if !visited[n] && disc.level(n) == level {
                        visited[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        zones.push((level, size));
    }
    let largest = zones.iter().map(|z| z.1).max().unwrap_or(1);
    let mut m = TextureMatrix::zeros(TextureKind::Glszm, ng, largest, disc.ng(), disc.count(), 1);
    for (level, size) in zones {
        m.add(level as usize - 1, size - 1, 1.0);
    }
    Ok(m)
}

pub fn glszm_features_from(m: &TextureMatrix) -> FeatureVector {
    let values = emphasis_features(m, m.voxels as f64);
    FeatureVector::from_pairs(GLSZM_NAMES.iter().copied().zip(values))
}

pub fn glszm_features(disc: &DiscretizedVolume) -> Result<FeatureVector> {
    Ok(glszm_features_from(&glszm_matrix(disc)?))
}

// ---------------------------------------------------------------- NGTDM

/// Column 0 holds `n_i` (voxels of level i with at least one in-mask
/// neighbour), column 1 holds `s_i = Σ |i - mean neighbour level|`.
pub fn ngtdm_matrix(disc: &DiscretizedVolume) -> Result<TextureMatrix> {
    let g = disc.geometry();
    let ng = disc.ng() as usize;
    let mut m = TextureMatrix::zeros(TextureKind::Ngtdm, ng, 2, disc.ng(), disc.count(), 26);
    let mut valid = 0usize;
    for idx in disc.region_indices() {
        let level = disc.level(idx);
        let at = g.coords(idx);
        let (mut sum, mut count) = (0u64, 0u64);
        for d in neighbours26() {
            if let Some(n) = g.offset(at, d) {
                let l = disc.level(n);
                if l > 0 {
                    sum += l as u64;
                    count += 1;
                }
            }
        }
        if count == 0 {
            continue;
        }
        valid += 1;
        let mean = sum as f64 / count as f64;
        m.add(level as usize - 1, 0, 1.0);
        m.add(level as usize - 1, 1, (level as f64 - mean).abs());
    }
    if valid == 0 {
        return Err(Error::DegenerateRegion("no in-mask voxel has an in-mask neighbour".into()));
    }
    Ok(m)
}

pub fn ngtdm_features_from(m: &TextureMatrix) -> FeatureVector {
    let levels: Vec<(f64, f64, f64)> = (0..m.rows)
        .filter(|&r| m.get(r, 0) > 0.0)
        .map(|r| ((r + 1) as f64, m.get(r, 0), m.get(r, 1)))
        .collect();
    let nvp: f64 = levels.iter().map(|l| l.1).sum();
    let p: Vec<f64> = levels.iter().map(|l| l.1 / nvp).collect();
    let s_total: f64 = levels.iter().map(|l| l.2).sum();
    let ps: f64 = levels.iter().zip(&p).map(|(l, pi)| pi * l.2).sum();
    let ngp = levels.len() as f64;

    let coarseness = if ps < EPS { COARSENESS_SENTINEL } else { 1.0 / ps };
    let (mut pair_contrast, mut busy_den, mut complexity, mut strength_num) = (0.0, 0.0, 0.0, 0.0);
    for (a, la) in levels.iter().enumerate() {
        for (b, lb) in levels.iter().enumerate() {
            let d = la.0 - lb.0;
            pair_contrast += p[a] * p[b] * d * d;
            busy_den += (la.0 * p[a] - lb.0 * p[b]).abs();
            complexity += d.abs() * (p[a] * la.2 + p[b] * lb.2) / (p[a] + p[b]);
            strength_num += (p[a] + p[b]) * d * d;
        }
    }
    let contrast = if ngp > 1.0 {
        pair_contrast / (ngp * (ngp - 1.0)) * (s_total / nvp)
    } else {
        0.0
    };
    let busyness = if busy_den < EPS { 0.0 } else { ps / busy_den };
    let complexity = complexity / nvp;
    let strength = if s_total < EPS { 0.0 } else { strength_num / s_total };
    FeatureVector::from_pairs(NGTDM_NAMES.iter().copied().zip([
        coarseness, contrast, busyness, complexity, strength,
    ]))
}

pub fn ngtdm_features(disc: &DiscretizedVolume) -> Result<FeatureVector> {
    Ok(ngtdm_features_from(&ngtdm_matrix(disc)?))
}
