use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{MaskSource, PipelineConfig};
use super::manifest::{ClinicalEncoder, CohortManifest, ManifestRow};
use super::split::{kfold_split, SplitPlan};
use crate::error::{Error, Result};
use crate::evaluation::ensemble_risk;
use crate::matrix::{column_mean_std, is_constant, FeatureMatrix, Standardizer};
use crate::multitask::{predict_net_with, train_survival_net, NetFile};
use crate::par::Execution;
use crate::radiomics::{extract_subject_features_with, feature_catalog};
use crate::survival::{concordance_index, fit_coxph, predict_risk, select_features, CoxModel, Outcome, Selection};
use crate::volume::{read_labels, read_scalar, Interpolation, SubjectImages, CT_PAD, PET_PAD};

/// Name of the survival-net score when used as a Cox covariate.
pub const DEEP_RISK: &str = "deep_risk";

/// Reads, resamples and optionally crops one subject's images.
pub fn load_subject(row: &ManifestRow, config: &PipelineConfig) -> Result<SubjectImages> {
    let mask_path = match config.mask_source {
        MaskSource::Reference => row.mask.as_ref(),
        MaskSource::Alternative => row.mask_alt.as_ref(),
    }
    .ok_or_else(|| Error::Manifest(format!("subject {} has no mask for {:?}", row.subject_id, config.mask_source)))?;
    let spacing = config.preprocess.spacing;
    let ct = read_scalar(&row.ct)?.resample(spacing, Interpolation::Trilinear)?;
    let pet = read_scalar(&row.pet)?.resample(spacing, Interpolation::Trilinear)?;
    let mask = read_labels(mask_path)?.resample(spacing, Interpolation::Nearest)?;
    let images = SubjectImages::new(pet, ct, mask)?;
    match config.preprocess.crop_size {
        None => Ok(images),
        Some(size) => {
            let center = images.mask.foreground_center().ok_or(Error::EmptyMask)?;
            SubjectImages::new(
                images.pet.crop_centered(center, size, PET_PAD)?,
                images.ct.crop_centered(center, size, CT_PAD)?,
                images.mask.crop_centered(center, size, 0)?,
            )
        }
    }
}

/// Per-subject inputs shared by every fold: outcomes, the clinical design
/// matrix and (when needed) the radiomics matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortData {
    pub ids: Vec<String>,
    pub outcomes: Vec<Outcome>,
    pub clinical: FeatureMatrix,
    pub radiomics: Option<FeatureMatrix>,
}

impl CohortData {
    pub fn build(manifest: &CohortManifest, config: &PipelineConfig, exec: Execution) -> Result<CohortData> {
        Self::build_with_encoder(manifest, config, &ClinicalEncoder::fit(manifest), exec)
    }

    /// Uses a given categorical encoding, e.g. one fitted on a training cohort.
    pub fn build_with_encoder(
        manifest: &CohortManifest,
        config: &PipelineConfig,
        encoder: &ClinicalEncoder,
        exec: Execution,
    ) -> Result<CohortData> {
        let radiomics = if config.needs_radiomics() {
            let rows = exec.try_map_range(manifest.len(), |i| {
                let row = &manifest.rows[i];
                let images = load_subject(row, config)?;
                extract_subject_features_with(&images, &config.radiomics, Execution::Sequential)
                    .map(|fv| fv.values)
                    .map_err(|e| Error::Manifest(format!("subject {}: {e}", row.subject_id)))
            })?;
            Some(FeatureMatrix::from_rows(manifest.subject_ids(), feature_catalog(), &rows)?)
        } else {
            None
        };
        Ok(CohortData {
            ids: manifest.subject_ids(),
            outcomes: manifest.outcomes(),
            clinical: encoder.encode(manifest, true)?,
            radiomics,
        })
    }

    /// Rows for `ids`, in that order.
    pub fn subset(&self, ids: &[String]) -> Result<CohortData> {
        let rows = ids
            .iter()
            .map(|id| {
                self.ids
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::invalid(format!("unknown subject {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CohortData {
            ids: ids.to_vec(),
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
            clinical: self.clinical.select_rows(&rows),
            radiomics: self.radiomics.as_ref().map(|r| r.select_rows(&rows)),
        })
    }

    fn radiomics(&self) -> Result<&FeatureMatrix> {
        self.radiomics
            .as_ref()
            .ok_or_else(|| Error::invalid("cohort was built without radiomics features"))
    }
}

/// Everything fitted on one fold's training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub radiomics_scaler: Option<Standardizer>,
    pub selection: Option<Selection>,
    pub net: Option<NetFile>,
    pub cox: CoxModel,
}

impl FoldModel {
    /// Assembles the Cox design for `data` from the fitted transforms.
    fn design(&self, data: &CohortData, config: &PipelineConfig) -> Result<FeatureMatrix> {
        let mut design = FeatureMatrix::new(data.ids.clone(), Vec::new(), DMatrix::zeros(data.ids.len(), 0))?;
        if config.blocks.clinical {
            design = design.hconcat(&data.clinical)?;
        }
        if let (Some(scaler), Some(sel)) = (&self.radiomics_scaler, &self.selection) {
            let z = scaler.apply(data.radiomics()?)?.select_named(&sel.names)?;
            if config.blocks.radiomics {
                design = design.hconcat(&z)?;
            }
            if let Some(net) = &self.net {
                let h = predict_net_with(&net.net, &z, Execution::Sequential)?;
                let col = FeatureMatrix::new(data.ids.clone(), vec![DEEP_RISK.into()], DMatrix::from_column_slice(h.len(), 1, &h))?;
                design = design.hconcat(&col)?;
            }
        }
        Ok(design)
    }

    pub fn predict(&self, data: &CohortData, config: &PipelineConfig) -> Result<Vec<f64>> {
        predict_risk(&self.cox, &self.design(data, config)?)
    }
}

/// Fits every stage on `train_ids` only: radiomics standardization, LASSO
/// selection, the survival net and the final Cox model. Columns that are
/// constant on the training rows are left out of the Cox model; if none remain
/// the null model (all risks 0) is returned.
pub fn fit_fold(data: &CohortData, train_ids: &[String], config: &PipelineConfig, seed: u64) -> Result<FoldModel> {
    config.validate()?;
    let train = data.subset(train_ids)?;
    let mut model = FoldModel {
        radiomics_scaler: None,
        selection: None,
        net: None,
        cox: CoxModel::null(),
    };
    if config.needs_radiomics() {
        let scaler = Standardizer::fit(train.radiomics()?)?;
        let z = scaler.apply(train.radiomics()?)?;
        let selection = select_features(&z, &train.outcomes, config.target_k)?;
        if config.blocks.deep_risk {
            let net_config = crate::multitask::TrainConfig {
                seed,
                ..config.net.clone()
            };
            let trained = train_survival_net(&z.select_named(&selection.names)?, &train.outcomes, &net_config)?;
            model.net = Some(NetFile {
                net: trained.net,
                config: net_config,
            });
        }
        model.radiomics_scaler = Some(scaler);
        model.selection = Some(selection);
    }
    let design = model.design(&train, config)?;
    let keep: Vec<usize> = (0..design.ncols())
        .filter(|&j| {
            let (m, s) = column_mean_std(design.values(), j);
            !is_constant(m, s)
        })
        .collect();
    if !keep.is_empty() {
        model.cox = fit_coxph(&design.select_columns(&keep), &train.outcomes)?;
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub test_events: usize,
    pub c_index: f64,
    pub selected: Vec<String>,
    pub cox_features: Vec<String>,
}

/// Cross-validated C-index summary: per fold, mean and range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: String,
    pub folds: Vec<FoldReport>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub config: PipelineConfig,
}

impl CvReport {
    /// One table row: `method<TAB>mean (min-max)`.
    pub fn table_row(&self) -> String {
        format!("{}\t{:.3} ({:.3}-{:.3})", self.method, self.mean, self.min, self.max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Risk scores keyed by subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub subject_ids: Vec<String>,
    pub scores: Vec<f64>,
}

impl ScoreSet {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["subject_id", "risk"])?;
        for (id, s) in self.subject_ids.iter().zip(&self.scores) {
            w.write_record([id.as_str(), &s.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<ScoreSet> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let mut set = ScoreSet {
            subject_ids: Vec::new(),
            scores: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            let score = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::invalid("malformed score row"))?;
            set.subject_ids.push(rec.get(0).unwrap_or_default().to_string());
            set.scores.push(score);
        }
        Ok(set)
    }
}

/// Z-score ensemble of per-fold scores on one shared set of subjects.
pub fn ensemble_cv_models(sets: &[ScoreSet]) -> Result<ScoreSet> {
    let first = sets.first().ok_or_else(|| Error::invalid("no score sets to ensemble"))?;
    if let Some(k) = sets.iter().position(|s| s.subject_ids != first.subject_ids) {
        return Err(Error::invalid(format!("score set {k} is not aligned with score set 0")));
    }
    let scores = ensemble_risk(&sets.iter().map(|s| s.scores.clone()).collect::<Vec<_>>())?;
    Ok(ScoreSet {
        subject_ids: first.subject_ids.clone(),
        scores,
    })
}

/// Result of a cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRun {
    pub report: CvReport,
    pub plan: SplitPlan,
    pub models: Vec<FoldModel>,
    /// Held-out scores per fold.
    pub test_scores: Vec<ScoreSet>,
    pub data: CohortData,
    pub encoder: ClinicalEncoder,
}

/// Seed for fold `k`'s stochastic stages, derived from the run seed.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// K-fold cross-validation of `config` on `manifest`. Folds run independently
/// under `exec` and are merged by fold index.
pub fn run_cv(manifest: &CohortManifest, config: &PipelineConfig, exec: Execution) -> Result<CvRun> {
    config.validate()?;
    let encoder = ClinicalEncoder::fit(manifest);
    let data = CohortData::build_with_encoder(manifest, config, &encoder, exec)?;
    run_cv_on(data, encoder, config, exec)
}

/// Cross-validation on already extracted cohort data.
pub fn run_cv_on(data: CohortData, encoder: ClinicalEncoder, config: &PipelineConfig, exec: Execution) -> Result<CvRun> {
    config.validate()?;
    let plan = kfold_split(&data.ids, &data.outcomes, config.folds, config.seed)?;
    let results = exec.try_map_range(plan.k(), |k| {
        let run = || -> Result<(FoldModel, ScoreSet, FoldReport)> {
            let train_ids = plan.train_ids(k, &data.ids);
            let model = fit_fold(&data, &train_ids, config, fold_seed(config.seed, k))?;
            let test = data.subset(&plan.folds[k])?;
            let scores = model.predict(&test, config)?;
            let c_index = concordance_index(&scores, &test.outcomes)?;
            let report = FoldReport {
                fold: k,
                n_train: train_ids.len(),
                n_test: test.ids.len(),
                test_events: test.outcomes.iter().filter(|o| o.event).count(),
                c_index,
                selected: model.selection.as_ref().map(|s| s.names.clone()).unwrap_or_default(),
                cox_features: model.cox.feature_names.clone(),
            };
            Ok((model, ScoreSet { subject_ids: test.ids, scores }, report))
        };
        run().map_err(|e| Error::Fold {
            fold: k,
            source: Box::new(e),
        })
    })?;
    let mut models = Vec::new();
    let mut test_scores = Vec::new();
    let mut folds = Vec::new();
    for (m, s, r) in results {
        models.push(m);
        test_scores.push(s);
        folds.push(r);
    }
    let cs: Vec<f64> = folds.iter().map(|f| f.c_index).collect();
    let report = CvReport {
        method: config.method_label(),
        mean: cs.iter().sum::<f64>() / cs.len() as f64,
        min: cs.iter().copied().fold(f64::INFINITY, f64::min),
        max: cs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        folds,
        config: config.clone(),
    };
    Ok(CvRun {
        report,
        plan,
        models,
        test_scores,
        data,
        encoder,
    })
}

impl CvRun {
    /// Scores an external cohort with every fold model.
    pub fn score_external(&self, manifest: &CohortManifest, exec: Execution) -> Result<Vec<ScoreSet>> {
        let data = CohortData::build_with_encoder(manifest, &self.report.config, &self.encoder, exec)?;
        self.models
            .iter()
            .map(|m| {
                Ok(ScoreSet {
                    subject_ids: data.ids.clone(),
                    scores: m.predict(&data, &self.report.config)?,
                })
            })
            .collect()
    }

    /// Writes `report.json`, `split.json`, `features.csv` and, per fold,
    /// `folds/<k>/{model.json, fold.json, net.json, scores.csv}`.
    pub fn write(&self, out: impl AsRef<Path>) -> Result<()> {
        let out = out.as_ref();
        let write = |path: &Path, text: String| std::fs::write(path, text).map_err(|e| Error::io(path, e));
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write(&out.join("report.json"), self.report.to_json()?)?;
        write(&out.join("split.json"), serde_json::to_string_pretty(&self.plan)?)?;
        if let Some(r) = &self.data.radiomics {
            r.write_csv(out.join("features.csv"))?;
        }
        for (k, (model, scores)) in self.models.iter().zip(&self.test_scores).enumerate() {
            let dir = out.join("folds").join(k.to_string());
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            model.cox.write_json(dir.join("model.json"))?;
            write(&dir.join("fold.json"), serde_json::to_string_pretty(model)?)?;
            if let Some(net) = &model.net {
                net.write_json(dir.join("net.json"))?;
            }
            scores.write_csv(dir.join("scores.csv"))?;
        }
        Ok(())
    }
}
