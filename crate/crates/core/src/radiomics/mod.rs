//! Handcrafted radiomics over PET/CT: first-order statistics, GLCM, GLRLM,
//! GLSZM, NGTDM and shape, on the original images and on all eight Haar
//! sub-bands.

mod discretize;
mod first_order;
mod shape;
mod texture;
mod wavelet;

pub use discretize::{discretize, DiscretizedVolume};
pub use first_order::{first_order_features, FIRST_ORDER_NAMES};
pub use shape::{shape_features, shape_features_with, SHAPE_NAMES};
pub use texture::{
    glcm_features, glcm_features_from, glcm_matrix, glrlm_features, glrlm_features_from, glrlm_matrix,
    glszm_features, glszm_features_from, glszm_matrix, ngtdm_features, ngtdm_features_from, ngtdm_matrix,
    TextureKind, TextureMatrix, COARSENESS_SENTINEL, DIRECTIONS, EPS, GLCM_NAMES, GLRLM_NAMES, GLSZM_NAMES,
    NGTDM_NAMES,
};
pub use wavelet::{inverse_wavelet, wavelet_decompose, WaveletBank, BAND_TAGS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::volume::{resample::labels_to_dims, LabelVolume, ScalarVolume, SubjectImages};

/// Features per (modality, image type): 14 + 8 + 11 + 11 + 5.
pub const FEATURES_PER_IMAGE: usize = 49;
pub const MODALITIES: [&str; 2] = ["pet", "ct"];
/// Total catalog size: 2 modalities x 9 image types x 49 + 10 shape features.
pub const CATALOG_SIZE: usize = 2 * 9 * FEATURES_PER_IMAGE + 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        let mut fv = FeatureVector::new();
        for (n, v) in pairs {
            fv.names.push(n.to_string());
            fv.values.push(v);
        }
        fv
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Appends `other` with every name prefixed by `prefix.`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: FeatureVector) {
        for (n, v) in other.names.into_iter().zip(other.values) {
            self.names.push(format!("{prefix}.{n}"));
            self.values.push(v);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadiomicsConfig {
    pub pet_bin_width: f64,
    pub ct_bin_width: f64,
}

impl Default for RadiomicsConfig {
    fn default() -> Self {
        RadiomicsConfig {
            pet_bin_width: 25.0,
            ct_bin_width: 25.0,
        }
    }
}

/// GTVp (1) and GTVn (2) merged into a single foreground label 1.
pub fn merge_mask(mask: &LabelVolume) -> LabelVolume {
    mask.map(|l| u8::from(l == 1 || l == 2))
}

fn image_types() -> impl Iterator<Item = String> {
    std::iter::once("original".to_string()).chain(BAND_TAGS.iter().map(|t| format!("wavelet-{t}")))
}

/// Feature names in extraction order.
pub fn feature_catalog() -> Vec<String> {
    let mut names = Vec::with_capacity(CATALOG_SIZE);
    for modality in MODALITIES {
        for image in image_types() {
            let families: [(&str, &[&str]); 5] = [
                ("firstorder", &FIRST_ORDER_NAMES),
                ("glcm", &GLCM_NAMES),
                ("glrlm", &GLRLM_NAMES),
                ("glszm", &GLSZM_NAMES),
                ("ngtdm", &NGTDM_NAMES),
            ];
            for (family, list) in families {
                names.extend(list.iter().map(|n| format!("{modality}.{image}.{family}.{n}")));
            }
        }
    }
    names.extend(SHAPE_NAMES.iter().map(|n| format!("shape.{n}")));
    names
}

/// All 49 per-image features for one image and its region mask.
fn image_features(image: &ScalarVolume, mask: &LabelVolume, bin_width: f64) -> Result<Vec<f64>> {
    let disc = discretize(image, mask, bin_width)?;
    let mut out = Vec::with_capacity(FEATURES_PER_IMAGE);
    out.extend(first_order_features(image, mask, bin_width)?.values);
    out.extend(glcm_features(&disc)?.values);
    out.extend(glrlm_features(&disc)?.values);
    out.extend(glszm_features(&disc)?.values);
    out.extend(ngtdm_features(&disc)?.values);
    Ok(out)
}

pub fn extract_subject_features(images: &SubjectImages, config: &RadiomicsConfig) -> Result<FeatureVector> {
    extract_subject_features_with(images, config, Execution::default())
}

/// Extracts the full catalog. Image jobs may run in parallel under `exec`;
/// results are assembled in catalog order.
pub fn extract_subject_features_with(
    images: &SubjectImages,
    config: &RadiomicsConfig,
    exec: Execution,
) -> Result<FeatureVector> {
    let merged = merge_mask(&images.mask);
    if merged.count_nonzero() == 0 {
        return Err(Error::EmptyMask);
    }
    let pet_bank = wavelet_decompose(&images.pet)?;
    let ct_bank = wavelet_decompose(&images.ct)?;
    let band_mask = labels_to_dims(&merged, pet_bank.bands()[0].dims())?;
    // sub-band masks carry the sub-band geometry
    let band_mask = LabelVolume::new(*pet_bank.bands()[0].geometry(), band_mask.into_data())?;

    let mut jobs: Vec<(&ScalarVolume, &LabelVolume, f64)> = Vec::with_capacity(18);
    for (original, bank, width) in [
        (&images.pet, &pet_bank, config.pet_bin_width),
        (&images.ct, &ct_bank, config.ct_bin_width),
    ] {
        jobs.push((original, &merged, width));
        for band in bank.bands() {
            jobs.push((band, &band_mask, width));
        }
    }

    let blocks = exec.try_map_range(jobs.len(), |j| {
        let (image, mask, width) = jobs[j];
        image_features(image, mask, width)
    })?;
    let shape = shape_features_with(&merged, exec)?;

    let names = feature_catalog();
    let mut values: Vec<f64> = blocks.into_iter().flatten().collect();
    values.extend(shape.values);
    debug_assert_eq!(names.len(), values.len());
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::DegenerateRegion(format!("feature {} is not finite", names[i])));
    }
    Ok(FeatureVector { names, values })
}
