use serde::{Deserialize, Serialize};

use super::{Geometry, LabelVolume, Sample, ScalarVolume, Volume};
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

/// Output grid for a spacing change. The physical extent of the input
/// (voxel edges) is kept, so the first output center sits half an output
/// voxel inside the input's first edge.
fn target_geometry(g: &Geometry, target: [f64; 3]) -> Result<Geometry> {
    if target.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid(format!("target spacing must be positive, got {target:?}")));
    }
    let mut dims = [0usize; 3];
    let mut origin = [0f64; 3];
    for a in 0..3 {
        dims[a] = ((g.dims[a] as f64 * g.spacing[a] / target[a]).round() as usize).max(1);
        origin[a] = g.origin[a] - 0.5 * g.spacing[a] + 0.5 * target[a];
    }
    Geometry::new(dims, target, origin)
}

/// Continuous input index of output voxel `p` along one axis, clamped to the grid.
#[inline]
fn source_coord(p: usize, out_spacing: f64, in_spacing: f64, in_dim: usize) -> f64 {
    let c = (p as f64 + 0.5) * out_spacing / in_spacing - 0.5;
    c.clamp(0.0, (in_dim - 1) as f64)
}

#[inline]
fn nearest(c: f64) -> usize {
    (c + 0.5).floor() as usize
}

fn axis_coords(out: &Geometry, input: &Geometry, a: usize) -> Vec<f64> {
    (0..out.dims[a])
        .map(|p| source_coord(p, out.spacing[a], input.spacing[a], input.dims[a]))
        .collect()
}

fn resample_nearest<T: Sample>(v: &Volume<T>, out: Geometry, exec: Execution) -> Volume<T> {
    let g = *v.geometry();
    let cx: Vec<usize> = axis_coords(&out, &g, 0).into_iter().map(nearest).collect();
    let cy: Vec<usize> = axis_coords(&out, &g, 1).into_iter().map(nearest).collect();
    let cz: Vec<usize> = axis_coords(&out, &g, 2).into_iter().map(nearest).collect();
    let slice = out.dims[0] * out.dims[1];
    let mut data = vec![v.data()[0]; out.len()];
    exec.for_each_chunk(&mut data, slice, |k, plane| {
        for (n, s) in plane.iter_mut().enumerate() {
            let i = n % out.dims[0];
            let j = n / out.dims[0];
            *s = v.get(cx[i], cy[j], cz[k]);
        }
    });
    Volume::from_parts_unchecked(out, data)
}

/// Nearest-neighbour resampling of a mask onto `dims` voxels covering the same extent.
pub(crate) fn labels_to_dims(mask: &LabelVolume, dims: [usize; 3]) -> Result<LabelVolume> {
    let g = mask.geometry();
    let mut spacing = [0f64; 3];
    let mut origin = [0f64; 3];
    for a in 0..3 {
        spacing[a] = g.spacing[a] * g.dims[a] as f64 / dims[a] as f64;
        origin[a] = g.origin[a] - 0.5 * g.spacing[a] + 0.5 * spacing[a];
    }
    let out = Geometry::new(dims, spacing, origin)?;
    Ok(resample_nearest(mask, out, Execution::Sequential))
}

impl ScalarVolume {
    pub fn resample(&self, target_spacing: [f64; 3], mode: Interpolation) -> Result<ScalarVolume> {
        self.resample_with(target_spacing, mode, Execution::default())
    }

    pub fn resample_with(
        &self,
        target_spacing: [f64; 3],
        mode: Interpolation,
        exec: Execution,
    ) -> Result<ScalarVolume> {
        let g = *self.geometry();
        let out = target_geometry(&g, target_spacing)?;
        if mode == Interpolation::Nearest {
            return Ok(resample_nearest(self, out, exec));
        }
        let split = |c: f64, n: usize| {
            let i0 = c.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, c - i0 as f64)
        };
        let cx: Vec<_> = axis_coords(&out, &g, 0).into_iter().map(|c| split(c, g.dims[0])).collect();
        let cy: Vec<_> = axis_coords(&out, &g, 1).into_iter().map(|c| split(c, g.dims[1])).collect();
        let cz: Vec<_> = axis_coords(&out, &g, 2).into_iter().map(|c| split(c, g.dims[2])).collect();
        let slice = out.dims[0] * out.dims[1];
        let mut data = vec![0.0; out.len()];
        exec.for_each_chunk(&mut data, slice, |k, plane| {
            let (z0, z1, fz) = cz[k];
            for (n, s) in plane.iter_mut().enumerate() {
                let (x0, x1, fx) = cx[n % out.dims[0]];
                let (y0, y1, fy) = cy[n / out.dims[0]];
                let lerp = |a: f64, b: f64, f: f64| a + (b - a) * f;
                let c00 = lerp(self.get(x0, y0, z0), self.get(x1, y0, z0), fx);
                let c10 = lerp(self.get(x0, y1, z0), self.get(x1, y1, z0), fx);
                let c01 = lerp(self.get(x0, y0, z1), self.get(x1, y0, z1), fx);
                let c11 = lerp(self.get(x0, y1, z1), self.get(x1, y1, z1), fx);
                *s = lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
            }
        });
        Ok(Volume::from_parts_unchecked(out, data))
    }
}

impl LabelVolume {
    /// Only nearest-neighbour interpolation is meaningful for labels.
    pub fn resample(&self, target_spacing: [f64; 3], mode: Interpolation) -> Result<LabelVolume> {
        if mode != Interpolation::Nearest {
            return Err(Error::invalid("trilinear interpolation is not defined for label volumes"));
        }
        let out = target_geometry(self.geometry(), target_spacing)?;
        Ok(resample_nearest(self, out, Execution::default()))
    }
}
