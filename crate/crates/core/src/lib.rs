//! Survival prognosis from PET/CT volumes.
//!
//! The crate covers the whole path from image volumes to a risk score:
//!
//! - [`volume`]: native grid I/O, resampling, cropping, intensity normalization, augmentation
//! - [`radiomics`]: Haar wavelet bank, gray-level discretization, first-order, texture and shape features
//! - [`survival`]: Cox partial likelihood, Newton CoxPH fitting, LASSO-Cox path and selection, Harrell's C
//! - [`multitask`]: soft Dice loss, combined loss, balanced batches, a small survival MLP
//! - [`evaluation`]: Dice, aggregated Dice, segmentation and risk ensembles
//! - [`pipeline`]: manifests, synthetic cohorts, cross-validation, persisted artifacts
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled (the default) and plain iteration otherwise.

pub mod error;
pub mod matrix;
pub mod evaluation;
pub mod multitask;
pub mod par;
pub mod pipeline;
pub mod radiomics;
pub mod survival;
pub mod volume;

pub use error::{Error, Result};
pub use matrix::{FeatureMatrix, Standardizer};
pub use par::Execution;
