use super::discretize::discretize;
use super::FeatureVector;
use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ScalarVolume};

pub const FIRST_ORDER_NAMES: [&str; 14] = [
    "mean",
    "variance",
    "skewness",
    "kurtosis",
    "energy",
    "entropy",
    "minimum",
    "maximum",
    "range",
    "median",
    "p10",
    "p90",
    "interquartile_range",
    "rms",
];

/// Linear interpolation between order statistics (`q` in [0, 1]).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Intensity statistics over in-mask voxels. Entropy uses the fixed-bin-width
/// histogram with `bin_width`.
pub fn first_order_features(volume: &ScalarVolume, mask: &LabelVolume, bin_width: f64) -> Result<FeatureVector> {
    let disc = discretize(volume, mask, bin_width)?;
    let mut values: Vec<f64> = volume
        .data()
        .iter()
        .zip(mask.data())
        .filter(|(_, &m)| m != 0)
        .map(|(&x, _)| x)
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let energy = values.iter().map(|x| x * x).sum::<f64>();

    let mut hist = vec![0usize; disc.ng() as usize + 1];
    for &l in disc.levels() {
        if l > 0 {
            hist[l as usize] += 1;
        }
    }
    let entropy = -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();

    values.sort_by(f64::total_cmp);
    let min = values[0];
    let max = values[values.len() - 1];
    let fv = FeatureVector::from_pairs(
        FIRST_ORDER_NAMES.iter().copied().zip([
            mean,
            m2,
            skewness,
            kurtosis,
            energy,
            entropy.max(0.0),
            min,
            max,
            max - min,
            percentile(&values, 0.5),
            percentile(&values, 0.1),
            percentile(&values, 0.9),
            percentile(&values, 0.75) - percentile(&values, 0.25),
            (energy / n).sqrt(),
        ]),
    );
    Ok(fv)
}
