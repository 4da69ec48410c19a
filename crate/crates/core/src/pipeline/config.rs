use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multitask::TrainConfig;
use crate::radiomics::RadiomicsConfig;
use crate::survival::DEFAULT_TARGET_K;

/// Covariate blocks that feed the final Cox model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocks {
    pub clinical: bool,
    pub radiomics: bool,
    pub deep_risk: bool,
}

impl Default for Blocks {
    fn default() -> Self {
        Blocks {
            clinical: true,
            radiomics: true,
            deep_risk: true,
        }
    }
}

/// Which segmentation defines the radiomics region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    /// The manifest's `mask` column (manual reference contours).
    Reference,
    /// The manifest's `mask_alt` column (automatically predicted contours).
    #[default]
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Target voxel spacing in mm.
    pub spacing: [f64; 3],
    /// Optional crop around the lesion center after resampling.
    pub crop_size: Option<[usize; 3]>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            spacing: [1.0; 3],
            crop_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub blocks: Blocks,
    pub mask_source: MaskSource,
    pub preprocess: PreprocessConfig,
    pub radiomics: RadiomicsConfig,
    /// Number of radiomics features kept by LASSO selection.
    pub target_k: usize,
    pub folds: usize,
    pub seed: u64,
    pub net: TrainConfig,
}

/// Survival-net settings sized for cohorts of a few hundred subjects.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        iterations: 1_000,
        schedule: vec![(0, 1e-2), (250, 5e-3), (500, 1e-3)],
        ..TrainConfig::default()
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            blocks: Blocks::default(),
            mask_source: MaskSource::default(),
            preprocess: PreprocessConfig::default(),
            radiomics: RadiomicsConfig::default(),
            target_k: DEFAULT_TARGET_K,
            folds: 5,
            seed: 0,
            net: desk_train_config(),
        }
    }
}

impl PipelineConfig {
    pub fn with_blocks(clinical: bool, radiomics: bool, deep_risk: bool) -> Self {
        PipelineConfig {
            blocks: Blocks {
                clinical,
                radiomics,
                deep_risk,
            },
            ..PipelineConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.blocks;
        if !(b.clinical || b.radiomics || b.deep_risk) {
            return Err(Error::invalid("at least one covariate block must be enabled"));
        }
        if self.target_k == 0 {
            return Err(Error::invalid("target_k must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("need at least two folds"));
        }
        if self.preprocess.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("target spacing must be positive"));
        }
        if self.preprocess.crop_size.is_some_and(|c| c.contains(&0)) {
            return Err(Error::invalid("crop size must be positive"));
        }
        if self.blocks.deep_risk {
            self.net.validate()?;
        }
        Ok(())
    }

    /// Radiomics features are needed by the radiomics block and as survival-net input.
    pub fn needs_radiomics(&self) -> bool {
        self.blocks.radiomics || self.blocks.deep_risk
    }

    /// Human-readable method name, e.g. "Survival net + Clinical indicators + Automatic radiomics".
    pub fn method_label(&self) -> String {
        let mut parts = Vec::new();
        if self.blocks.deep_risk {
            parts.push("Survival net");
        }
        if self.blocks.clinical {
            parts.push("Clinical indicators");
        }
        if self.blocks.radiomics {
            parts.push(match self.mask_source {
                MaskSource::Reference => "Traditional radiomics",
                MaskSource::Alternative => "Automatic radiomics",
            });
        }
        parts.join(" + ")
    }
}

/// The six method combinations compared in the cross-validation table.
pub fn method_table() -> Vec<PipelineConfig> {
    let traditional = PipelineConfig {
        mask_source: MaskSource::Reference,
        ..PipelineConfig::with_blocks(false, true, false)
    };
    vec![
        PipelineConfig::with_blocks(true, false, false),
        traditional,
        PipelineConfig::with_blocks(false, true, false),
        PipelineConfig::with_blocks(false, false, true),
        PipelineConfig::with_blocks(true, false, true),
        PipelineConfig::with_blocks(true, true, true),
    ]
}
