use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::survival::{Outcome, SurvivalRecord};

/// Required manifest columns, in order.
pub const MANIFEST_HEADER: [&str; 10] = [
    "subject_id",
    "ct",
    "pet",
    "mask",
    "time_days",
    "event",
    "age",
    "gender",
    "weight",
    "hpv",
];
/// Optional column naming an alternative (e.g. predicted) segmentation mask.
pub const ALT_MASK_COLUMN: &str = "mask_alt";
/// Level used for blank categorical values.
pub const MISSING_LEVEL: &str = "missing";
pub const NUMERIC_CLINICAL: [&str; 2] = ["age", "weight"];
pub const CATEGORICAL_CLINICAL: [&str; 2] = ["gender", "hpv"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub subject_id: String,
    pub ct: PathBuf,
    pub pet: PathBuf,
    pub mask: Option<PathBuf>,
    pub mask_alt: Option<PathBuf>,
    pub time_days: f64,
    pub event: bool,
    pub age: f64,
    pub gender: String,
    pub weight: f64,
    pub hpv: String,
    /// Unrecognized columns, kept verbatim.
    pub extra: BTreeMap<String, String>,
}

impl ManifestRow {
    pub fn outcome(&self) -> Outcome {
        Outcome {
            time: self.time_days,
            event: self.event,
        }
    }

    fn categorical(&self, column: &str) -> &str {
        match column {
            "gender" => &self.gender,
            "hpv" => &self.hpv,
            _ => unreachable!("not a categorical column: {column}"),
        }
    }

    fn numeric(&self, column: &str) -> f64 {
        match column {
            "age" => self.age,
            "weight" => self.weight,
            _ => unreachable!("not a numeric column: {column}"),
        }
    }
}

/// A validated cohort table. Image paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortManifest {
    pub rows: Vec<ManifestRow>,
    /// Columns present in the file but not part of the schema.
    pub unknown_columns: Vec<String>,
}

fn parse_field<T: std::str::FromStr>(value: &str, column: &str, line: usize) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Manifest(format!("line {line}: cannot parse {column} = {value:?}")))
}

fn level(value: &str) -> String {
    let v = value.trim();
    if v.is_empty() {
        MISSING_LEVEL.to_string()
    } else {
        v.to_string()
    }
}

/// Reads and validates a manifest CSV. Referenced image files must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<CohortManifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut required = [0usize; 10];
    for (slot, name) in required.iter_mut().zip(MANIFEST_HEADER) {
        *slot = col(name).ok_or_else(|| Error::Manifest(format!("missing column {name:?}")))?;
    }
    let alt = col(ALT_MASK_COLUMN);
    let unknown_columns: Vec<String> = header
        .iter()
        .filter(|h| !MANIFEST_HEADER.contains(&h.as_str()) && h.as_str() != ALT_MASK_COLUMN)
        .cloned()
        .collect();
    let resolve = |p: &str| -> Result<PathBuf> {
        let full = base.join(p.trim());
        if !full.is_file() {
            return Err(Error::Manifest(format!("referenced file {} does not exist", full.display())));
        }
        Ok(full)
    };
    let optional_path = |p: &str| -> Result<Option<PathBuf>> {
        if p.trim().is_empty() {
            Ok(None)
        } else {
            resolve(p).map(Some)
        }
    };

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let [sid, ct, pet, mask, time, event, age, gender, weight, hpv] = required.map(get);
        let subject_id = sid.trim().to_string();
        if subject_id.is_empty() {
            return Err(Error::Manifest(format!("line {line}: empty subject_id")));
        }
        if !seen.insert(subject_id.clone()) {
            return Err(Error::DuplicateSubject(subject_id));
        }
        let time_days: f64 = parse_field(time, "time_days", line)?;
        if !(time_days.is_finite() && time_days > 0.0) {
            return Err(Error::Manifest(format!(
                "line {line}: time_days must be positive for {subject_id}, got {time_days}"
            )));
        }
        let event = match event.trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::Manifest(format!("line {line}: event must be 0 or 1, got {other:?}"))),
        };
        let extra = header
            .iter()
            .enumerate()
            .filter(|(_, h)| unknown_columns.contains(h))
            .map(|(i, h)| (h.clone(), get(i).to_string()))
            .collect();
        rows.push(ManifestRow {
            ct: resolve(ct)?,
            pet: resolve(pet)?,
            mask: optional_path(mask)?,
            mask_alt: match alt {
                Some(i) => optional_path(get(i))?,
                None => None,
            },
            time_days,
            event,
            age: parse_field(age, "age", line)?,
            gender: level(gender),
            weight: parse_field(weight, "weight", line)?,
            hpv: level(hpv),
            extra,
            subject_id,
        });
    }
    if rows.is_empty() {
        return Err(Error::Manifest("manifest has no rows".into()));
    }
    Ok(CohortManifest { rows, unknown_columns })
}

impl CohortManifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.subject_id.clone()).collect()
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        self.rows.iter().map(ManifestRow::outcome).collect()
    }

    pub fn records(&self) -> Vec<SurvivalRecord> {
        self.rows
            .iter()
            .map(|r| SurvivalRecord {
                subject_id: r.subject_id.clone(),
                time_days: r.time_days,
                event: r.event,
            })
            .collect()
    }

    /// Writes the manifest with paths relative to `path`'s directory when possible.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let rel = |p: &Path| -> String {
            p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned()
        };
        let with_alt = self.rows.iter().any(|r| r.mask_alt.is_some());
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = MANIFEST_HEADER.to_vec();
        if with_alt {
            header.push(ALT_MASK_COLUMN);
        }
        header.extend(self.unknown_columns.iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &self.rows {
            let blank_missing = |v: &str| if v == MISSING_LEVEL { String::new() } else { v.to_string() };
            let mut rec = vec![
                r.subject_id.clone(),
                rel(&r.ct),
                rel(&r.pet),
                r.mask.as_deref().map(rel).unwrap_or_default(),
                r.time_days.to_string(),
                u8::from(r.event).to_string(),
                r.age.to_string(),
                blank_missing(&r.gender),
                r.weight.to_string(),
                blank_missing(&r.hpv),
            ];
            if with_alt {
                rec.push(r.mask_alt.as_deref().map(rel).unwrap_or_default());
            }
            for c in &self.unknown_columns {
                rec.push(r.extra.get(c).cloned().unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Recorded level order for each categorical clinical column: sorted, with
/// the missing level last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalEncoder {
    pub levels: BTreeMap<String, Vec<String>>,
}

impl ClinicalEncoder {
    pub fn fit(manifest: &CohortManifest) -> ClinicalEncoder {
        let levels = CATEGORICAL_CLINICAL
            .iter()
            .map(|&c| {
                let set: BTreeSet<&str> = manifest.rows.iter().map(|r| r.categorical(c)).collect();
                let mut lv: Vec<String> = set.iter().filter(|&&l| l != MISSING_LEVEL).map(|l| l.to_string()).collect();
                if set.contains(MISSING_LEVEL) {
                    lv.push(MISSING_LEVEL.to_string());
                }
                (c.to_string(), lv)
            })
            .collect();
        ClinicalEncoder { levels }
    }

    /// Column names: numeric columns, then `column=level` indicators. With
    /// `reference_coding`, the first level of each categorical is omitted.
    pub fn names(&self, reference_coding: bool) -> Vec<String> {
        let mut names: Vec<String> = NUMERIC_CLINICAL.iter().map(|c| c.to_string()).collect();
        for c in CATEGORICAL_CLINICAL {
            let skip = usize::from(reference_coding);
            names.extend(self.levels[c].iter().skip(skip).map(|l| format!("{c}={l}")));
        }
        names
    }

    /// Encodes every manifest row. Levels unseen at fit time get all-zero indicators.
    pub fn encode(&self, manifest: &CohortManifest, reference_coding: bool) -> Result<FeatureMatrix> {
        let names = self.names(reference_coding);
        let values = DMatrix::from_fn(manifest.len(), names.len(), |i, j| {
            let row = &manifest.rows[i];
            if j < NUMERIC_CLINICAL.len() {
                return row.numeric(NUMERIC_CLINICAL[j]);
            }
            let (column, lvl) = names[j].split_once('=').expect("indicator name");
            f64::from(u8::from(row.categorical(column) == lvl))
        });
        FeatureMatrix::new(manifest.subject_ids(), names, values)
    }
}
