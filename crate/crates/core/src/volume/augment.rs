use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LabelVolume, Sample, ScalarVolume, Volume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Co-registered PET, CT and mask for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectImages {
    pub pet: ScalarVolume,
    pub ct: ScalarVolume,
    pub mask: LabelVolume,
}

impl SubjectImages {
    pub fn new(pet: ScalarVolume, ct: ScalarVolume, mask: LabelVolume) -> Result<Self> {
        if !pet.geometry().same_grid(ct.geometry()) || !pet.geometry().same_grid(mask.geometry()) {
            return Err(Error::GeometryMismatch(format!(
                "pet {:?}, ct {:?}, mask {:?}",
                pet.dims(),
                ct.dims(),
                mask.dims()
            )));
        }
        Ok(SubjectImages { pet, ct, mask })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.pet.dims()
    }
}

/// Mirrors a volume along `axis`.
pub fn flip<T: Sample>(v: &Volume<T>, axis: Axis) -> Volume<T> {
    let g = *v.geometry();
    let a = axis.index();
    let n = g.dims[a];
    let mut data = Vec::with_capacity(g.len());
    for idx in 0..g.len() {
        let mut c = g.coords(idx);
        c[a] = n - 1 - c[a];
        data.push(v.get(c[0], c[1], c[2]));
    }
    Volume::from_parts_unchecked(g, data)
}

/// One random crop of `crop_size` (same offset for all three volumes), then
/// each listed axis is flipped with probability 0.5. Draw order: x, y, z
/// offsets, then one draw per listed flip axis.
pub fn augment<R: Rng + ?Sized>(
    images: &SubjectImages,
    rng: &mut R,
    crop_size: [usize; 3],
    flips: &[Axis],
) -> Result<SubjectImages> {
    let dims = images.dims();
    if crop_size.iter().zip(dims).any(|(&c, d)| c == 0 || c > d) {
        return Err(Error::invalid(format!("crop size {crop_size:?} exceeds dims {dims:?}")));
    }
    let mut corner = [0isize; 3];
    for a in 0..3 {
        corner[a] = rng.random_range(0..=dims[a] - crop_size[a]) as isize;
    }
    let mut pet = images.pet.crop_at(corner, crop_size, 0.0)?;
    let mut ct = images.ct.crop_at(corner, crop_size, 0.0)?;
    let mut mask = images.mask.crop_at(corner, crop_size, 0)?;
    for &axis in flips {
        if rng.random_bool(0.5) {
            pet = flip(&pet, axis);
            ct = flip(&ct, axis);
            mask = flip(&mask, axis);
        }
    }
    Ok(SubjectImages { pet, ct, mask })
}
