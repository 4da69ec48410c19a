use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{CohortManifest, ManifestRow, MISSING_LEVEL};
use crate::error::{Error, Result};
use crate::volume::{write_volume, Geometry, LabelVolume, ScalarVolume};

/// Generator settings for [`make_synthetic_cohort`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Edge length of the cubic 1 mm grid.
    pub size: usize,
    /// Log-hazard coefficient on the z-scored primary lesion voxel count.
    pub beta_volume: f64,
    /// Log-hazard coefficient on the z-scored mean PET uptake inside the lesion.
    pub beta_pet: f64,
    /// Target fraction of censored subjects.
    pub censoring: f64,
    pub node_probability: f64,
    /// Scale of the exponential event-time distribution, in days.
    pub baseline_days: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            size: 32,
            beta_volume: 1.5,
            beta_pet: 0.5,
            censoring: 0.79,
            node_probability: 0.3,
            baseline_days: 1000.0,
        }
    }
}

/// Generator internals for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub subject_id: String,
    pub lesion_voxels: usize,
    pub mean_pet: f64,
    /// True log-hazard.
    pub risk: f64,
    /// Uncensored event time in days.
    pub event_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub manifest_path: PathBuf,
    pub manifest: CohortManifest,
    pub truth: Vec<SubjectTruth>,
    /// Administrative censoring time in days.
    pub censor_time: f64,
}

struct Ellipsoid {
    center: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        let p = [i as f64, j as f64, k as f64];
        (0..3).map(|a| ((p[a] - self.center[a]) / self.radii[a]).powi(2)).sum::<f64>() <= 1.0
    }
}

fn mask_for(geom: Geometry, primary: &Ellipsoid, node: Option<&Ellipsoid>) -> Result<LabelVolume> {
    LabelVolume::from_fn(geom, |i, j, k| {
        if primary.contains(i, j, k) {
            1
        } else if node.is_some_and(|n| n.contains(i, j, k)) {
            2
        } else {
            0
        }
    })
}

/// Values are stored as f32 on disk; rounding here keeps memory and disk identical.
fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| if std > 0.0 { (x - mean) / std } else { 0.0 }).collect()
}

/// Writes `n` subjects (PET, CT, ground-truth and perturbed masks) plus
/// `manifest.csv` into `dir`. Every byte depends only on `n`, `seed` and `params`.
pub fn make_synthetic_cohort(dir: impl AsRef<Path>, n: usize, seed: u64, params: &SynthParams) -> Result<SyntheticCohort> {
    if n < 10 {
        return Err(Error::invalid(format!("synthetic cohort needs at least 10 subjects, got {n}")));
    }
    if params.size < 12 || !(0.0..1.0).contains(&params.censoring) || !(0.0..=1.0).contains(&params.node_probability) {
        return Err(Error::invalid("synthetic cohort parameters out of range"));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = Geometry::unit([params.size; 3])?;
    let mid = (params.size as f64 - 1.0) / 2.0;
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(n);
    let mut voxels = Vec::with_capacity(n);
    let mut uptake = Vec::with_capacity(n);

    for s in 0..n {
        let id = format!("synth-{s:03}");
        let primary = Ellipsoid {
            center: [0; 3].map(|_| mid + rng.random_range(-2.0..2.0)),
            radii: [0; 3].map(|_| rng.random_range(2.5..7.5)),
        };
        let node = rng.random_bool(params.node_probability).then(|| {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Ellipsoid {
                center: [
                    primary.center[0] + side * (primary.radii[0] + 4.0),
                    primary.center[1] + rng.random_range(-3.0..3.0),
                    primary.center[2] + rng.random_range(-3.0..3.0),
                ],
                radii: [rng.random_range(1.5..2.5); 3],
            }
        });
        let mask = mask_for(geom, &primary, node.as_ref())?;
        let alt_primary = Ellipsoid {
            center: primary.center.map(|c| c + rng.random_range(-1.0..1.0)),
            radii: primary.radii.map(|r| r * rng.random_range(0.85..1.15)),
        };
        let alt_mask = mask_for(geom, &alt_primary, node.as_ref())?;

        let lesion_level = rng.random_range(300.0..1500.0);
        let node_level = rng.random_range(200.0..600.0);
        let mut pet = Vec::with_capacity(geom.len());
        let mut ct = Vec::with_capacity(geom.len());
        for &label in mask.data() {
            let z1: f64 = noise.sample(&mut rng);
            let z2: f64 = noise.sample(&mut rng);
            let (p, c) = match label {
                1 => (lesion_level * (1.0 + 0.1 * z1), 60.0 + 15.0 * z2),
                2 => (node_level * (1.0 + 0.1 * z1), 50.0 + 15.0 * z2),
                _ => (100.0 + 10.0 * z1, 40.0 + 15.0 * z2),
            };
            pet.push(f32_exact(p.max(0.0)));
            ct.push(f32_exact(c));
        }
        let pet = ScalarVolume::new(geom, pet)?;
        let ct = ScalarVolume::new(geom, ct)?;
        let inside: Vec<f64> = pet.data().iter().zip(mask.data()).filter(|(_, &l)| l == 1).map(|(&p, _)| p).collect();
        voxels.push(inside.len());
        uptake.push(inside.iter().sum::<f64>() / inside.len() as f64);

        let paths = ["ct", "pet", "mask", "mask_alt"].map(|kind| dir.join(format!("{id}_{kind}.json")));
        write_volume(&ct, &paths[0])?;
        write_volume(&pet, &paths[1])?;
        write_volume(&mask, &paths[2])?;
        write_volume(&alt_mask, &paths[3])?;
        let [ct_path, pet_path, mask_path, alt_path] = paths;

        let hpv = if rng.random_bool(0.3) {
            MISSING_LEVEL.to_string()
        } else if rng.random_bool(0.6) {
            "positive".to_string()
        } else {
            "negative".to_string()
        };
        let weight_noise: f64 = noise.sample(&mut rng);
        rows.push(ManifestRow {
            subject_id: id,
            ct: ct_path,
            pet: pet_path,
            mask: Some(mask_path),
            mask_alt: Some(alt_path),
            time_days: 0.0,
            event: false,
            age: rng.random_range(40..=80) as f64,
            gender: if rng.random_bool(0.8) { "M" } else { "F" }.to_string(),
            weight: ((80.0 + 15.0 * weight_noise) * 10.0).round() / 10.0,
            hpv,
            extra: BTreeMap::new(),
        });
    }

    let zv = zscore(&voxels.iter().map(|&v| v as f64).collect::<Vec<_>>());
    let zp = zscore(&uptake);
    let risk: Vec<f64> = zv.iter().zip(&zp).map(|(a, b)| params.beta_volume * a + params.beta_pet * b).collect();
    let times: Vec<f64> = risk
        .iter()
        .map(|r| {
            let e: f64 = Exp1.sample(&mut rng);
            params.baseline_days * e.max(1e-12) / r.exp()
        })
        .collect();
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let events = (((1.0 - params.censoring) * n as f64).round() as usize).clamp(1, n - 1);
    let censor_time = 0.5 * (sorted[events - 1] + sorted[events]);

    let mut truth = Vec::with_capacity(n);
    for (s, row) in rows.iter_mut().enumerate() {
        row.event = times[s] <= censor_time;
        row.time_days = times[s].min(censor_time);
        truth.push(SubjectTruth {
            subject_id: row.subject_id.clone(),
            lesion_voxels: voxels[s],
            mean_pet: uptake[s],
            risk: risk[s],
            event_time: times[s],
        });
    }
    let manifest = CohortManifest {
        rows,
        unknown_columns: Vec::new(),
    };
    let manifest_path = dir.join("manifest.csv");
    manifest.write(&manifest_path)?;
    let manifest = super::manifest::load_manifest(&manifest_path)?;
    Ok(SyntheticCohort {
        manifest_path,
        manifest,
        truth,
        censor_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &t in &idx[i..=j] {
                r[t] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let (za, zb) = (zscore(a), zscore(b));
        za.iter().zip(&zb).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
    }

    #[test]
    fn censoring_and_signal() {
        let dir = tempfile::tempdir().unwrap();
        let c = make_synthetic_cohort(dir.path(), 200, 5, &SynthParams::default()).unwrap();
        let censored = c.manifest.rows.iter().filter(|r| !r.event).count() as f64 / 200.0;
        assert!((censored - 0.79).abs() <= 0.05, "{censored}");
        let v: Vec<f64> = c.truth.iter().map(|t| t.lesion_voxels as f64).collect();
        let r: Vec<f64> = c.truth.iter().map(|t| t.risk).collect();
        let rho = pearson(&ranks(&v), &ranks(&r));
        assert!(rho > 0.9, "spearman {rho}");
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        make_synthetic_cohort(a.path(), 12, 9, &SynthParams::default()).unwrap();
        make_synthetic_cohort(b.path(), 12, 9, &SynthParams::default()).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names.len(), 12 * 8 + 1);
        for name in names {
            assert_eq!(
                std::fs::read(a.path().join(&name)).unwrap(),
                std::fs::read(b.path().join(&name)).unwrap(),
                "{name:?}"
            );
        }
    }

    #[test]
    fn too_small_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(make_synthetic_cohort(dir.path(), 9, 0, &SynthParams::default()).is_err());
    }
}
