//! Cohort manifests, synthetic cohorts, cross-validation and persisted artifacts.

mod config;
mod cv;
mod manifest;
mod split;
mod synth;

pub use config::{desk_train_config, method_table, Blocks, MaskSource, PipelineConfig, PreprocessConfig};
pub use cv::{
    ensemble_cv_models, fit_fold, fold_seed, load_subject, run_cv, run_cv_on, CohortData, CvReport, CvRun, FoldModel,
    FoldReport, ScoreSet, DEEP_RISK,
};
pub use manifest::{
    load_manifest, ClinicalEncoder, CohortManifest, ManifestRow, ALT_MASK_COLUMN, CATEGORICAL_CLINICAL,
    MANIFEST_HEADER, MISSING_LEVEL, NUMERIC_CLINICAL,
};
pub use split::{kfold_split, SplitPlan};
pub use synth::{make_synthetic_cohort, SubjectTruth, SynthParams, SyntheticCohort};

use crate::error::Result;
use crate::matrix::{FeatureMatrix, Standardizer};

/// Fits z-scoring on `train` and applies it to both matrices. Zero-variance
/// training columns are dropped and listed in `Standardizer::dropped`.
pub fn standardize_features(train: &FeatureMatrix, apply: &FeatureMatrix) -> Result<(FeatureMatrix, FeatureMatrix, Standardizer)> {
    let s = Standardizer::fit(train)?;
    Ok((s.apply(train)?, s.apply(apply)?, s))
}
