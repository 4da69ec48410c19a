//! Single-level separable orthonormal Haar decomposition in 3D.
//!
//! Analysis runs along x, then y, then z. Odd lengths are extended by one
//! mirrored sample (half-sample symmetric), so every sub-band has
//! `ceil(n / 2)` voxels per axis.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::volume::{Geometry, ScalarVolume, Volume};

/// Sub-band tags, letters in x, y, z order.
pub const BAND_TAGS: [&str; 8] = ["LLL", "LLH", "LHL", "LHH", "HLL", "HLH", "HHL", "HHH"];

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBank {
    bands: Vec<ScalarVolume>,
    source: Geometry,
}

fn band_geometry(source: &Geometry) -> Result<Geometry> {
    let mut dims = [0; 3];
    let mut spacing = [0.0; 3];
    let mut origin = [0.0; 3];
    for a in 0..3 {
        dims[a] = source.dims[a].div_ceil(2);
        spacing[a] = 2.0 * source.spacing[a];
        origin[a] = source.origin[a] + 0.5 * source.spacing[a];
    }
    Geometry::new(dims, spacing, origin)
}

impl WaveletBank {
    /// Assembles a bank from eight bands in [`BAND_TAGS`] order.
    pub fn from_bands(bands: Vec<ScalarVolume>, source: Geometry) -> Result<Self> {
        if bands.len() != 8 {
            return Err(Error::invalid(format!("expected 8 sub-bands, got {}", bands.len())));
        }
        let expected = band_geometry(&source)?.dims;
        for (tag, b) in BAND_TAGS.iter().zip(&bands) {
            if b.dims() != expected {
                return Err(Error::GeometryMismatch(format!(
                    "sub-band {tag} has dims {:?}, expected {expected:?}",
                    b.dims()
                )));
            }
        }
        Ok(WaveletBank { bands, source })
    }

    pub fn bands(&self) -> &[ScalarVolume] {
        &self.bands
    }

    pub fn band(&self, tag: &str) -> Option<&ScalarVolume> {
        BAND_TAGS.iter().position(|t| *t == tag).map(|i| &self.bands[i])
    }

    /// Geometry of the decomposed volume.
    pub fn source(&self) -> &Geometry {
        &self.source
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &ScalarVolume)> {
        BAND_TAGS.iter().copied().zip(self.bands.iter())
    }
}

/// Splits `data` (laid out on `dims`) along `axis` into low and high halves.
fn analyze(data: &[f64], dims: [usize; 3], axis: usize) -> ([usize; 3], Vec<f64>, Vec<f64>) {
    let n = dims[axis];
    let m = n.div_ceil(2);
    let mut out_dims = dims;
    out_dims[axis] = m;
    let len = out_dims.iter().product();
    let mut low = vec![0.0; len];
    let mut high = vec![0.0; len];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let out_stride = match axis {
        0 => 1,
        1 => out_dims[0],
        _ => out_dims[0] * out_dims[1],
    };
    for_each_line(out_dims, axis, |out_base| {
        let c = coords(out_base, out_dims);
        let in_base = c[0] + dims[0] * (c[1] + dims[1] * c[2]);
        for p in 0..m {
            let a = data[in_base + 2 * p * stride];
            let b = if 2 * p + 1 < n { data[in_base + (2 * p + 1) * stride] } else { a };
            low[out_base + p * out_stride] = (a + b) * FRAC_1_SQRT_2;
            high[out_base + p * out_stride] = (a - b) * FRAC_1_SQRT_2;
        }
    });
    (out_dims, low, high)
}

/// Inverse of [`analyze`]; the result has `n` samples along `axis`.
fn synthesize(low: &[f64], high: &[f64], dims: [usize; 3], axis: usize, n: usize) -> ([usize; 3], Vec<f64>) {
    let m = dims[axis];
    let mut out_dims = dims;
    out_dims[axis] = n;
    let mut out = vec![0.0; out_dims.iter().product()];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let out_stride = match axis {
        0 => 1,
        1 => out_dims[0],
        _ => out_dims[0] * out_dims[1],
    };
    for_each_line(dims, axis, |in_base| {
        let c = coords(in_base, dims);
        let out_base = c[0] + out_dims[0] * (c[1] + out_dims[1] * c[2]);
        for p in 0..m {
            let l = low[in_base + p * stride];
            let h = high[in_base + p * stride];
            out[out_base + 2 * p * out_stride] = (l + h) * FRAC_1_SQRT_2;
            if 2 * p + 1 < n {
                out[out_base + (2 * p + 1) * out_stride] = (l - h) * FRAC_1_SQRT_2;
            }
        }
    });
    (out_dims, out)
}

fn coords(idx: usize, dims: [usize; 3]) -> [usize; 3] {
    [idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1])]
}

/// Calls `f` with the flat index of the first sample of every line along `axis`.
fn for_each_line(dims: [usize; 3], axis: usize, mut f: impl FnMut(usize)) {
    let [nx, ny, nz] = dims;
    let (ri, rj, rk) = match axis {
        0 => (1, ny, nz),
        1 => (nx, 1, nz),
        _ => (nx, ny, 1),
    };
    for k in 0..rk {
        for j in 0..rj {
            for i in 0..ri {
                f(i + nx * (j + ny * k));
            }
        }
    }
}

pub fn wavelet_decompose(volume: &ScalarVolume) -> Result<WaveletBank> {
    let source = *volume.geometry();
    if source.dims.iter().any(|&d| d < 2) {
        return Err(Error::invalid(format!(
            "wavelet decomposition needs every dim >= 2, got {:?}",
            source.dims
        )));
    }
    let band_geom = band_geometry(&source)?;
    // level-by-level: index bit 2 = x high, bit 1 = y high, bit 0 = z high
    let mut parts: Vec<(usize, [usize; 3], Vec<f64>)> = vec![(0, source.dims, volume.data().to_vec())];
    for axis in 0..3 {
        let mut next = Vec::with_capacity(parts.len() * 2);
        for (code, dims, data) in parts {
            let (d, lo, hi) = analyze(&data, dims, axis);
            next.push((code << 1, d, lo));
            next.push(((code << 1) | 1, d, hi));
        }
        parts = next;
    }
    parts.sort_by_key(|p| p.0);
    let bands = parts
        .into_iter()
        .map(|(_, _, data)| Volume::from_parts_unchecked(band_geom, data))
        .collect();
    WaveletBank::from_bands(bands, source)
}

pub fn inverse_wavelet(bank: &WaveletBank) -> Result<ScalarVolume> {
    let source = bank.source;
    let mut parts: Vec<([usize; 3], Vec<f64>)> =
        bank.bands.iter().map(|b| (b.dims(), b.data().to_vec())).collect();
    for axis in (0..3).rev() {
        let mut next = Vec::with_capacity(parts.len() / 2);
        for pair in parts.chunks(2) {
            let (dims, lo) = &pair[0];
            let (_, hi) = &pair[1];
            next.push(synthesize(lo, hi, *dims, axis, source.dims[axis]));
        }
        parts = next;
    }
    let (_, data) = parts.pop().expect("one volume after synthesis");
    Volume::new(source, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> ScalarVolume {
        let g = Geometry::unit(dims).unwrap();
        ScalarVolume::new(g, (0..g.len()).map(|_| rng.random_range(-10.0..10.0)).collect()).unwrap()
    }

    #[test]
    fn constant_volume_goes_to_lll() {
        let g = Geometry::unit([4, 6, 2]).unwrap();
        let v = ScalarVolume::filled(g, 3.0);
        let bank = wavelet_decompose(&v).unwrap();
        let expect = 3.0 * 2f64.powf(1.5);
        for (tag, b) in bank.iter() {
            assert_eq!(b.dims(), [2, 3, 1]);
            for &x in b.data() {
                if tag == "LLL" {
                    assert!((x - expect).abs() < 1e-12);
                } else {
                    assert!(x.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn band_letters_follow_axes() {
        // a ramp along x only has detail in the bands that are high in x
        let g = Geometry::unit([4, 4, 4]).unwrap();
        let v = ScalarVolume::from_fn(g, |i, _, _| i as f64).unwrap();
        let bank = wavelet_decompose(&v).unwrap();
        for (tag, b) in bank.iter() {
            let energy: f64 = b.data().iter().map(|x| x * x).sum();
            match tag {
                "LLL" | "HLL" => assert!(energy > 0.0, "{tag}"),
                _ => assert!(energy < 1e-20, "{tag}"),
            }
        }
    }

    #[test]
    fn round_trip_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dims in [[2, 2, 2], [4, 6, 8], [16, 2, 10]] {
            let v = random(&mut rng, dims);
            let bank = wavelet_decompose(&v).unwrap();
            let back = inverse_wavelet(&bank).unwrap();
            for (a, b) in back.data().iter().zip(v.data()) {
                assert!((a - b).abs() < 1e-9);
            }
            let e_in: f64 = v.data().iter().map(|x| x * x).sum();
            let e_out: f64 = bank.bands().iter().flat_map(|b| b.data()).map(|x| x * x).sum();
            assert!(((e_in - e_out) / e_in).abs() < 1e-9);
        }
    }

    #[test]
    fn odd_dims_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random(&mut rng, [5, 3, 7]);
        let bank = wavelet_decompose(&v).unwrap();
        assert_eq!(bank.bands()[0].dims(), [3, 2, 4]);
        let back = inverse_wavelet(&bank).unwrap();
        for (a, b) in back.data().iter().zip(v.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_bank_inverts_to_zero() {
        let source = Geometry::unit([4, 4, 2]).unwrap();
        let bg = band_geometry(&source).unwrap();
        let bands = (0..8).map(|_| ScalarVolume::filled(bg, 0.0)).collect();
        let bank = WaveletBank::from_bands(bands, source).unwrap();
        assert!(inverse_wavelet(&bank).unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mismatched_bands_rejected() {
        let source = Geometry::unit([4, 4, 2]).unwrap();
        let bg = band_geometry(&source).unwrap();
        let mut bands: Vec<_> = (0..7).map(|_| ScalarVolume::filled(bg, 0.0)).collect();
        bands.push(ScalarVolume::filled(Geometry::unit([1, 1, 1]).unwrap(), 0.0));
        assert!(WaveletBank::from_bands(bands, source).is_err());
        let v = ScalarVolume::filled(Geometry::unit([4, 1, 4]).unwrap(), 0.0);
        assert!(wavelet_decompose(&v).is_err());
    }
}
