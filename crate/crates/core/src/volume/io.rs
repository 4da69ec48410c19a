//! Native grid format: `<name>.json` header plus `<name>.raw` little-endian samples, x-fastest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Geometry, LabelVolume, Sample, ScalarVolume, Volume};
use crate::error::{Error, Result};

pub const ORDER_X_FASTEST: &str = "x-fastest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub dtype: String,
    pub order: String,
}

/// Sample encodings understood by the raw companion file.
pub trait GridSample: Sample {
    const DTYPE: &'static str;
    const WIDTH: usize;
    fn encode(self, out: &mut Vec<u8>);
}

impl GridSample for f64 {
    const DTYPE: &'static str = "f32";
    const WIDTH: usize = 4;
    /// Stored as f32; values that are not exactly representable are rounded.
    fn encode(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self as f32).to_le_bytes());
    }
}

impl GridSample for u8 {
    const DTYPE: &'static str = "u8";
    const WIDTH: usize = 1;
    fn encode(self, out: &mut Vec<u8>) {
        out.push(self);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    Scalar(ScalarVolume),
    Label(LabelVolume),
}

fn raw_path(header: &Path) -> PathBuf {
    header.with_extension("raw")
}

fn read_header(path: &Path) -> Result<Header> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| Error::Header {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if header.order != ORDER_X_FASTEST {
        return Err(Error::Header {
            path: path.to_path_buf(),
            message: format!("unsupported order {:?}", header.order),
        });
    }
    Ok(header)
}

/// Reads a header and its companion raw file.
pub fn read_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let path = path.as_ref();
    let header = read_header(path)?;
    let geometry = Geometry::new(header.dims, header.spacing, header.origin)?;
    let width = match header.dtype.as_str() {
        "f32" => 4,
        "u8" => 1,
        other => return Err(Error::UnknownDtype(other.to_string())),
    };
    let raw = raw_path(path);
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    if bytes.len() % width != 0 || bytes.len() / width != geometry.len() {
        return Err(Error::LengthMismatch {
            expected: geometry.len(),
            found: bytes.len() / width,
        });
    }
    match width {
        4 => {
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            Ok(AnyVolume::Scalar(Volume::new(geometry, data)?))
        }
        _ => Ok(AnyVolume::Label(Volume::new(geometry, bytes)?)),
    }
}

/// Reads a scalar volume; `u8` files are widened.
pub fn read_scalar(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    Ok(match read_volume(path)? {
        AnyVolume::Scalar(v) => v,
        AnyVolume::Label(v) => v.map(f64::from),
    })
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    match read_volume(path.as_ref())? {
        AnyVolume::Label(v) => Ok(v),
        AnyVolume::Scalar(_) => Err(Error::Header {
            path: path.as_ref().to_path_buf(),
            message: "expected dtype u8 for a label volume".into(),
        }),
    }
}

/// Writes `<path>` (header) and the `.raw` companion next to it.
pub fn write_volume<T: GridSample>(volume: &Volume<T>, path: impl AsRef<Path>) -> Result<()> {
    volume.validate()?;
    let path = path.as_ref();
    let g = volume.geometry();
    let header = Header {
        dims: g.dims,
        spacing: g.spacing,
        origin: g.origin,
        dtype: T::DTYPE.to_string(),
        order: ORDER_X_FASTEST.to_string(),
    };
    let mut bytes = Vec::with_capacity(volume.len() * T::WIDTH);
    for &v in volume.data() {
        v.encode(&mut bytes);
    }
    let json = serde_json::to_string_pretty(&header)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))?;
    let raw = raw_path(path);
    fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;
    Ok(())
}
