//! Segmentation + survival training pieces: soft Dice, the combined loss,
//! censoring-balanced batches and a small fully connected survival network.

mod net;
mod sampler;
mod train;

pub use net::{predict_net, predict_net_with, NetGradients, SurvivalNet};
pub use sampler::{balanced_batches, BalancedBatches};
pub use train::{read_loss_history, train_survival_net, write_loss_history, NetFile, Sampling, TrainConfig, TrainedNet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ScalarVolume};

/// Additive smoothing in the soft Dice ratio.
pub const DICE_SMOOTH: f64 = 1.0;

/// A voxelwise foreground probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap(ScalarVolume);

impl ProbabilityMap {
    pub fn new(volume: ScalarVolume) -> Result<Self> {
        if let Some(i) = volume.data().iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!(
                "probability {} at voxel {i} is outside [0, 1]",
                volume.data()[i]
            )));
        }
        Ok(ProbabilityMap(volume))
    }

    /// Hard map: 1 where `mask == label`, 0 elsewhere.
    pub fn from_label(mask: &LabelVolume, label: u8) -> Self {
        ProbabilityMap(mask.map(|v| if v == label { 1.0 } else { 0.0 }))
    }

    pub fn volume(&self) -> &ScalarVolume {
        &self.0
    }

    pub fn into_volume(self) -> ScalarVolume {
        self.0
    }
}

fn check_binary(truth: &LabelVolume) -> Result<()> {
    match truth.data().iter().position(|&v| v > 1) {
        Some(i) => Err(Error::invalid(format!("mask value {} at voxel {i} is not binary", truth.data()[i]))),
        None => Ok(()),
    }
}

/// `1 - (2 Σ p·g + 1) / (Σ p + Σ g + 1)` against a binary mask.
pub fn soft_dice_loss(pred: &ProbabilityMap, truth: &LabelVolume) -> Result<f64> {
    if pred.0.geometry().dims != truth.geometry().dims {
        return Err(Error::GeometryMismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.0.geometry().dims,
            truth.geometry().dims
        )));
    }
    check_binary(truth)?;
    let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
    for (&p, &g) in pred.0.data().iter().zip(truth.data()) {
        let g = g as f64;
        inter += p * g;
        sp += p;
        sg += g;
    }
    Ok(1.0 - (2.0 * inter + DICE_SMOOTH) / (sp + sg + DICE_SMOOTH))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub segmentation: f64,
    pub survival: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            segmentation: 1.0,
            survival: 1.0,
        }
    }
}

/// Segmentation loss plus survival loss.
pub fn combined_loss(dice: f64, surv: f64) -> f64 {
    dice + surv
}

pub fn combined_loss_weighted(dice: f64, surv: f64, weights: LossWeights) -> f64 {
    weights.segmentation * dice + weights.survival * surv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn grid(dims: [usize; 3]) -> Geometry {
        Geometry::new(dims, [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let mask = LabelVolume::from_fn(grid([10, 10, 2]), |i, _, _| (i < 5) as u8).unwrap();
        assert_eq!(mask.count_nonzero(), 100);
        let p = ProbabilityMap::from_label(&mask, 1);
        assert_eq!(soft_dice_loss(&p, &mask).unwrap(), 0.0);
    }

    #[test]
    fn empty_prediction() {
        let mask = LabelVolume::from_fn(grid([10, 1, 1]), |_, _, _| 1).unwrap();
        let p = ProbabilityMap::new(ScalarVolume::filled(grid([10, 1, 1]), 0.0)).unwrap();
        assert!((soft_dice_loss(&p, &mask).unwrap() - (1.0 - 1.0 / 11.0)).abs() < 1e-15);
    }

    #[test]
    fn half_probability() {
        let mask = LabelVolume::from_fn(grid([2, 2, 2]), |i, _, _| (i == 0) as u8).unwrap();
        let p = ProbabilityMap::new(ScalarVolume::filled(grid([2, 2, 2]), 0.5)).unwrap();
        assert!((soft_dice_loss(&p, &mask).unwrap() - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ProbabilityMap::new(ScalarVolume::filled(grid([2, 1, 1]), 1.5)).is_err());
        let p = ProbabilityMap::new(ScalarVolume::filled(grid([2, 1, 1]), 0.5)).unwrap();
        let m = LabelVolume::filled(grid([3, 1, 1]), 0);
        assert!(matches!(soft_dice_loss(&p, &m), Err(Error::GeometryMismatch(_))));
        let m = LabelVolume::filled(grid([2, 1, 1]), 2);
        assert!(soft_dice_loss(&p, &m).is_err());
    }

    #[test]
    fn combined() {
        assert_eq!(combined_loss(0.0, 0.0), 0.0);
        assert!((combined_loss(0.4, 1.386) - 1.786).abs() < 1e-15);
        assert_eq!(combined_loss_weighted(0.4, 1.386, LossWeights::default()), combined_loss(0.4, 1.386));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn binary_loss_bounds(bits in proptest::collection::vec(proptest::bool::ANY, 1..64),
                                  pbits in proptest::collection::vec(proptest::bool::ANY, 64)) {
                let n = bits.len();
                let g = grid([n, 1, 1]);
                let truth = LabelVolume::new(g, bits.iter().map(|&b| b as u8).collect()).unwrap();
                let pred = ProbabilityMap::new(ScalarVolume::new(g, pbits[..n].iter().map(|&b| b as u8 as f64).collect()).unwrap()).unwrap();
                let loss = soft_dice_loss(&pred, &truth).unwrap();
                prop_assert!((0.0..1.0).contains(&loss));
                let same = pbits[..n] == bits[..];
                prop_assert_eq!(loss == 0.0, same);
            }
        }
    }
}
