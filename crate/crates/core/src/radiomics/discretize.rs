use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelVolume, ScalarVolume};

/// Fixed-bin-width gray levels over a masked region. Voxels outside the mask
/// carry level 0; voxels inside carry `1..=ng`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedVolume {
    geometry: Geometry,
    levels: Vec<u32>,
    ng: u32,
    bin_edges: Vec<f64>,
    /// Inclusive lower and exclusive upper corner of the in-mask bounding box.
    bbox: ([usize; 3], [usize; 3]),
    count: usize,
}

impl DiscretizedVolume {
    /// Builds a discretized volume directly from levels (0 = outside the region).
    pub fn from_levels(geometry: Geometry, levels: Vec<u32>) -> Result<Self> {
        if levels.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                found: levels.len(),
            });
        }
        let ng = levels.iter().copied().max().unwrap_or(0);
        let bin_edges = (0..=ng).map(f64::from).collect();
        Self::assemble(geometry, levels, ng, bin_edges)
    }

    fn assemble(geometry: Geometry, levels: Vec<u32>, ng: u32, bin_edges: Vec<f64>) -> Result<Self> {
        let mut lo = geometry.dims;
        let mut hi = [0usize; 3];
        let mut count = 0;
        for (idx, &l) in levels.iter().enumerate() {
            if l > 0 {
                let c = geometry.coords(idx);
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a] + 1);
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(DiscretizedVolume {
            geometry,
            levels,
            ng,
            bin_edges,
            bbox: (lo, hi),
            count,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn ng(&self) -> u32 {
        self.ng
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn bbox(&self) -> ([usize; 3], [usize; 3]) {
        self.bbox
    }

    /// Number of in-mask voxels.
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn level(&self, idx: usize) -> u32 {
        self.levels[idx]
    }

    /// Flat indices of in-mask voxels, in storage order.
    pub fn region_indices(&self) -> Vec<usize> {
        let (lo, hi) = self.bbox;
        let mut out = Vec::with_capacity(self.count);
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    let idx = self.geometry.index(i, j, k);
                    if self.levels[idx] > 0 {
                        out.push(idx);
                    }
                }
            }
        }
        out
    }
}

/// level(x) = floor((x - min) / bin_width) + 1 over in-mask voxels (mask != 0).
pub fn discretize(volume: &ScalarVolume, mask: &LabelVolume, bin_width: f64) -> Result<DiscretizedVolume> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
    }
    if !volume.geometry().same_grid(mask.geometry()) {
        return Err(Error::GeometryMismatch(format!(
            "volume {:?} vs mask {:?}",
            volume.dims(),
            mask.dims()
        )));
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&x, &m) in volume.data().iter().zip(mask.data()) {
        if m != 0 {
            min = min.min(x);
            max = max.max(x);
        }
    }
    if !min.is_finite() {
        return Err(Error::EmptyMask);
    }
    let level = |x: f64| ((x - min) / bin_width).floor() as u32 + 1;
    let ng = level(max);
    let levels = volume
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&x, &m)| if m != 0 { level(x) } else { 0 })
        .collect();
    let bin_edges = (0..=ng).map(|b| min + b as f64 * bin_width).collect();
    DiscretizedVolume::assemble(*volume.geometry(), levels, ng, bin_edges)
}
