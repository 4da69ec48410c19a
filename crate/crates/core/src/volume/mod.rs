//! 3D volumes on a regular grid and the preprocessing applied to them.
//!
//! Samples are stored x-fastest: index = i + nx·(j + ny·k).

mod augment;
mod io;
pub(crate) mod resample;

pub use augment::{augment, flip, Axis, SubjectImages};
pub use io::{read_labels, read_scalar, read_volume, write_volume, AnyVolume, GridSample, Header};
pub use resample::Interpolation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label set used for segmentation masks: background, GTVp, GTVn.
pub const DEFAULT_LABELS: [u8; 3] = [0, 1, 2];

/// CT fill value for out-of-bounds voxels (air).
pub const CT_PAD: f64 = -1024.0;
/// PET fill value for out-of-bounds voxels.
pub const PET_PAD: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::EmptyVolume);
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid(format!("spacing must be positive and finite, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid(format!("origin must be finite, got {origin:?}")));
        }
        Ok(Geometry { dims, spacing, origin })
    }

    /// Unit spacing, zero origin.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    /// Index of `(i, j, k) + offset`, or `None` when it leaves the grid.
    #[inline]
    pub fn offset(&self, at: [usize; 3], offset: [isize; 3]) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let v = at[a] as isize + offset[a];
            if v < 0 || v >= self.dims[a] as isize {
                return None;
            }
            c[a] = v as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Same dims and spacing within 1e-9 (origins may differ).
    pub fn same_grid(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl VoxelIndex {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        VoxelIndex { i, j, k }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.i, self.j, self.k]
    }
}

impl From<[usize; 3]> for VoxelIndex {
    fn from(v: [usize; 3]) -> Self {
        VoxelIndex::new(v[0], v[1], v[2])
    }
}

/// Sample types a volume may hold.
pub trait Sample: Copy + PartialEq + Send + Sync + 'static {
    fn is_valid(&self) -> bool;
}

impl Sample for f64 {
    fn is_valid(&self) -> bool {
        self.is_finite()
    }
}

impl Sample for u8 {
    fn is_valid(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    geometry: Geometry,
    data: Vec<T>,
}

/// PET, CT, probability maps, wavelet sub-bands.
pub type ScalarVolume = Volume<f64>;
/// Segmentation masks.
pub type LabelVolume = Volume<u8>;

impl<T: Sample> Volume<T> {
    pub fn new(geometry: Geometry, data: Vec<T>) -> Result<Self> {
        if geometry.is_empty() {
            return Err(Error::EmptyVolume);
        }
        if data.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_valid()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Volume { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: T) -> Self {
        Volume {
            data: vec![value; geometry.len()],
            geometry,
        }
    }

    /// Builds a volume by evaluating `f(i, j, k)` at every voxel.
    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        let [nx, ny, nz] = geometry.dims;
        let mut data = Vec::with_capacity(geometry.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(geometry, data)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geometry.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.geometry.origin
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to samples. Callers are responsible for keeping them
    /// valid; [`write_volume`] re-checks.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.geometry.index(i, j, k)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.geometry.is_empty() {
            return Err(Error::EmptyVolume);
        }
        if let Some(bad) = self.data.iter().position(|v| !v.is_valid()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(())
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            geometry: self.geometry,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Crops `size` voxels around `center`. Output voxel `p` reads input voxel
    /// `center - size/2 + p` (floor division); reads outside the input give `pad`.
    pub fn crop_centered(&self, center: VoxelIndex, size: [usize; 3], pad: T) -> Result<Self> {
        let c = center.as_array();
        let mut corner = [0isize; 3];
        for a in 0..3 {
            corner[a] = c[a] as isize - (size[a] / 2) as isize;
        }
        self.crop_at(corner, size, pad)
    }

    /// Crops the block starting at `corner` (may be negative or past the end).
    pub fn crop_at(&self, corner: [isize; 3], size: [usize; 3], pad: T) -> Result<Self> {
        if size.contains(&0) {
            return Err(Error::invalid(format!("crop size must be positive, got {size:?}")));
        }
        let g = &self.geometry;
        let mut origin = g.origin;
        for a in 0..3 {
            origin[a] += corner[a] as f64 * g.spacing[a];
        }
        let out_geom = Geometry::new(size, g.spacing, origin)?;
        let src = [0usize; 3];
        Volume::from_fn(out_geom, |i, j, k| {
            match g.offset(src, [corner[0] + i as isize, corner[1] + j as isize, corner[2] + k as isize]) {
                Some(idx) => self.data[idx],
                None => pad,
            }
        })
    }

    pub(crate) fn from_parts_unchecked(geometry: Geometry, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), geometry.len());
        Volume { geometry, data }
    }
}

impl ScalarVolume {
    /// Clips to [-1024, 1024] HU and maps linearly onto [-1, 1].
    pub fn normalize_ct(&self) -> ScalarVolume {
        self.map(|x| x.clamp(-1024.0, 1024.0) / 1024.0)
    }

    /// Z-score over all voxels with the population standard deviation.
    pub fn normalize_zscore(&self) -> Result<ScalarVolume> {
        if self.len() < 2 {
            return Err(Error::ConstantVolume);
        }
        let (mean, std) = mean_std(&self.data);
        if !(std > 0.0) {
            return Err(Error::ConstantVolume);
        }
        Ok(self.map(|x| (x - mean) / std))
    }
}

impl LabelVolume {
    /// Fails if any label lies outside `allowed`.
    pub fn check_labels(&self, allowed: &[u8]) -> Result<()> {
        match self.data.iter().find(|l| !allowed.contains(l)) {
            Some(l) => Err(Error::invalid(format!("label {l} not in label set {allowed:?}"))),
            None => Ok(()),
        }
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&l| l != 0).count()
    }

    /// Voxel index of the foreground centroid, rounded; `None` for an empty mask.
    pub fn foreground_center(&self) -> Option<VoxelIndex> {
        let mut sum = [0f64; 3];
        let mut n = 0usize;
        for (idx, &l) in self.data.iter().enumerate() {
            if l != 0 {
                let c = self.geometry.coords(idx);
                for a in 0..3 {
                    sum[a] += c[a] as f64;
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        let c = sum.map(|s| (s / n as f64).round() as usize);
        Some(VoxelIndex::new(c[0], c[1], c[2]))
    }
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
