//! Overlap metrics for segmentations and ensembling of segmentation maps and risk scores.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multitask::ProbabilityMap;
use crate::par::Execution;
use crate::volume::{LabelVolume, Volume};

/// Voxel counts behind a Dice coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlap {
    pub intersection: u64,
    pub predicted: u64,
    pub truth: u64,
}

impl Overlap {
    /// `2|A∩B| / (|A| + |B|)`, and 1 when both masks are empty.
    pub fn dice(&self) -> f64 {
        let denom = self.predicted + self.truth;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.intersection as f64 / denom as f64
        }
    }
}

fn check_dims<A, B>(a: &Volume<A>, b: &Volume<B>) -> Result<()>
where
    A: crate::volume::Sample,
    B: crate::volume::Sample,
{
    if a.geometry().dims != b.geometry().dims {
        return Err(Error::GeometryMismatch(format!(
            "{:?} vs {:?}",
            a.geometry().dims,
            b.geometry().dims
        )));
    }
    Ok(())
}

/// Overlap of the voxels equal to `label` in each mask.
pub fn overlap(pred: &LabelVolume, truth: &LabelVolume, label: u8) -> Result<Overlap> {
    check_dims(pred, truth)?;
    let mut o = Overlap::default();
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        let (p, t) = (p == label, t == label);
        o.predicted += p as u64;
        o.truth += t as u64;
        o.intersection += (p && t) as u64;
    }
    Ok(o)
}

/// Dice coefficient of two binary masks (nonzero is foreground).
pub fn dice(pred: &LabelVolume, truth: &LabelVolume) -> Result<f64> {
    check_dims(pred, truth)?;
    let mut o = Overlap::default();
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        let (p, t) = (p != 0, t != 0);
        o.predicted += p as u64;
        o.truth += t as u64;
        o.intersection += (p && t) as u64;
    }
    Ok(o.dice())
}

/// Cohort-level Dice as a ratio of sums: `Σ 2|A_k∩B_k| / Σ (|A_k| + |B_k|)`.
pub fn aggregated_dice(cases: &[Overlap]) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::invalid("aggregated Dice needs at least one subject"));
    }
    let inter: u64 = cases.iter().map(|c| c.intersection).sum();
    let denom: u64 = cases.iter().map(|c| c.predicted + c.truth).sum();
    if denom == 0 {
        return Err(Error::invalid("every mask in the cohort is empty"));
    }
    Ok(2.0 * inter as f64 / denom as f64)
}

/// One subject's predicted and reference segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct SegCase {
    pub subject_id: String,
    pub predicted: LabelVolume,
    pub truth: LabelVolume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceRow {
    pub subject_id: String,
    pub label: u8,
    pub dice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub label: u8,
    pub aggregated_dice: f64,
    pub mean_dice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegReport {
    pub rows: Vec<DiceRow>,
    pub summary: Vec<LabelSummary>,
}

/// Per-subject and aggregated Dice for each label, e.g. `[1, 2]` for primary tumor and nodes.
pub fn segmentation_report(cases: &[SegCase], labels: &[u8], exec: Execution) -> Result<SegReport> {
    if cases.is_empty() || labels.is_empty() {
        return Err(Error::invalid("report needs at least one subject and one label"));
    }
    let per_case: Vec<Vec<Overlap>> = exec.try_map_range(cases.len(), |i| {
        labels
            .iter()
            .map(|&l| overlap(&cases[i].predicted, &cases[i].truth, l))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for (case, overlaps) in cases.iter().zip(&per_case) {
        for (&label, o) in labels.iter().zip(overlaps) {
            rows.push(DiceRow {
                subject_id: case.subject_id.clone(),
                label,
                dice: o.dice(),
            });
        }
    }
    let summary = labels
        .iter()
        .enumerate()
        .map(|(li, &label)| {
            let column: Vec<Overlap> = per_case.iter().map(|o| o[li]).collect();
            let aggregated = aggregated_dice(&column).unwrap_or(1.0);
            let mean = column.iter().map(Overlap::dice).sum::<f64>() / column.len() as f64;
            LabelSummary {
                label,
                aggregated_dice: aggregated,
                mean_dice: mean,
            }
        })
        .collect();
    Ok(SegReport { rows, summary })
}

impl SegReport {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_summary_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(&self.summary)?).map_err(|e| Error::io(path, e))
    }
}

fn check_maps(maps: &[ProbabilityMap]) -> Result<()> {
    let first = maps.first().ok_or_else(|| Error::invalid("no model outputs to ensemble"))?;
    for m in &maps[1..] {
        check_dims(first.volume(), m.volume())?;
    }
    Ok(())
}

/// Voxelwise mean probability, then foreground where the mean exceeds 0.5.
pub fn ensemble_average(maps: &[ProbabilityMap]) -> Result<LabelVolume> {
    check_maps(maps)?;
    let k = maps.len() as f64;
    let geom = *maps[0].volume().geometry();
    let data = (0..geom.len())
        .map(|i| {
            let mean = maps.iter().map(|m| m.volume().data()[i]).sum::<f64>() / k;
            (mean > 0.5) as u8
        })
        .collect();
    LabelVolume::new(geom, data)
}

/// Each map thresholded at 0.5, then foreground where a strict majority agrees.
pub fn ensemble_vote(maps: &[ProbabilityMap]) -> Result<LabelVolume> {
    check_maps(maps)?;
    let geom = *maps[0].volume().geometry();
    let data = (0..geom.len())
        .map(|i| {
            let votes = maps.iter().filter(|m| m.volume().data()[i] > 0.5).count();
            (2 * votes > maps.len()) as u8
        })
        .collect();
    LabelVolume::new(geom, data)
}

/// Z-scores each model's scores across subjects (population std), then averages per subject.
pub fn ensemble_risk(score_sets: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = score_sets.first().ok_or_else(|| Error::invalid("no score sets to ensemble"))?;
    let n = first.len();
    if n < 2 {
        return Err(Error::invalid("need at least two subjects to z-score"));
    }
    let mut out = vec![0.0; n];
    for (k, s) in score_sets.iter().enumerate() {
        if s.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: s.len() });
        }
        if let Some(i) = s.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mean = s.iter().sum::<f64>() / n as f64;
        let std = (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        if !(std > 0.0) {
            return Err(Error::invalid(format!("scores of model {k} have zero variance")));
        }
        for (o, v) in out.iter_mut().zip(s) {
            *o += (v - mean) / std;
        }
    }
    let k = score_sets.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
    Ok(out)
}
