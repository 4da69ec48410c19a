use nalgebra::Matrix3;

use super::FeatureVector;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::volume::LabelVolume;

pub const SHAPE_NAMES: [&str; 10] = [
    "voxel_volume",
    "surface_area",
    "surface_volume_ratio",
    "sphericity",
    "compactness1",
    "maximum_3d_diameter",
    "major_axis_length",
    "minor_axis_length",
    "elongation",
    "flatness",
];

const FACE_OFFSETS: [[isize; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

/// Shape descriptors of the foreground (non-zero) voxels. Surface area counts
/// exposed voxel faces; axis lengths come from the population covariance of
/// voxel-center positions (mm).
pub fn shape_features(mask: &LabelVolume) -> Result<FeatureVector> {
    shape_features_with(mask, Execution::default())
}

pub fn shape_features_with(mask: &LabelVolume, exec: Execution) -> Result<FeatureVector> {
    let g = mask.geometry();
    let sp = g.spacing;
    let face_area = [sp[1] * sp[2], sp[0] * sp[2], sp[0] * sp[1]];
    let inside = |idx: Option<usize>| idx.is_some_and(|i| mask.data()[i] != 0);

    let mut count = 0usize;
    let mut area = 0.0;
    let mut boundary: Vec<[f64; 3]> = Vec::new();
    let mut sum = [0.0; 3];
    let mut points: Vec<[f64; 3]> = Vec::new();
    for (idx, &l) in mask.data().iter().enumerate() {
        if l == 0 {
            continue;
        }
        count += 1;
        let at = g.coords(idx);
        let p = [at[0] as f64 * sp[0], at[1] as f64 * sp[1], at[2] as f64 * sp[2]];
        let mut exposed = false;
        for (f, off) in FACE_OFFSETS.iter().enumerate() {
            if !inside(g.offset(at, *off)) {
                area += face_area[f / 2];
                exposed = true;
            }
        }
        if exposed {
            boundary.push(p);
        }
        for a in 0..3 {
            sum[a] += p[a];
        }
        points.push(p);
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let volume = count as f64 * g.voxel_volume();
    let sphericity = std::f64::consts::PI.cbrt() * (6.0 * volume).powf(2.0 / 3.0) / area;
    let compactness1 = volume / (std::f64::consts::PI.sqrt() * area.powf(1.5));

    // the farthest pair of voxel centers always lies on the boundary
    let row_max = exec.map_range(boundary.len(), |i| {
        let a = boundary[i];
        boundary[i + 1..]
            .iter()
            .map(|b| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
            .fold(0.0f64, f64::max)
    });
    let diameter = row_max.into_iter().fold(0.0f64, f64::max).sqrt();

    let n = count as f64;
    let mean = sum.map(|s| s / n);
    let mut cov = Matrix3::<f64>::zeros();
    for p in &points {
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += (p[r] - mean[r]) * (p[c] - mean[c]);
            }
        }
    }
    cov /= n;
    let mut eig: Vec<f64> = cov.symmetric_eigenvalues().iter().map(|e| e.max(0.0)).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let (major, minor, least) = (eig[0], eig[1], eig[2]);
    let (elongation, flatness) = if major > 0.0 {
        ((minor / major).sqrt(), (least / major).sqrt())
    } else {
        (1.0, 1.0)
    };
    Ok(FeatureVector::from_pairs(SHAPE_NAMES.iter().copied().zip([
        volume,
        area,
        area / volume,
        sphericity,
        compactness1,
        diameter,
        4.0 * major.sqrt(),
        4.0 * minor.sqrt(),
        elongation,
        flatness,
    ])))
}
