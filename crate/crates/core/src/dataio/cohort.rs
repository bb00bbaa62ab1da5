use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SCORE_NAMES: [&str; 3] = ["moca", "memory", "language"];

/// One subject's T x B region-by-time matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcellatedTimeseries {
    pub subject_id: String,
    /// Row `t`, column `b` holds region `b` at time sample `t`.
    pub values: Array2<f64>,
    pub tr_seconds: f64,
    pub region_labels: Vec<String>,
}

impl ParcellatedTimeseries {
    pub fn new(
        subject_id: impl Into<String>,
        values: Array2<f64>,
        tr_seconds: f64,
        region_labels: Vec<String>,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        let (t, b) = values.dim();
        if t < 2 || b < 2 {
            return Err(Error::Shape(format!(
                "subject '{subject_id}': timeseries must be at least 2x2, got {t}x{b}"
            )));
        }
        if region_labels.len() != b {
            return Err(Error::Shape(format!(
                "subject '{subject_id}': {} region labels for {b} regions",
                region_labels.len()
            )));
        }
        if !(tr_seconds > 0.0 && tr_seconds.is_finite()) {
            return Err(Error::Invalid(format!("tr_seconds must be positive, got {tr_seconds}")));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                path: PathBuf::from(&subject_id),
                row,
                col,
            });
        }
        Ok(Self {
            subject_id,
            values,
            tr_seconds,
            region_labels,
        })
    }

    pub fn n_timepoints(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_regions(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Diagnosis {
    CN,
    #[serde(rename = "aMCI")]
    AMci,
    DAT,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 3] = [Diagnosis::CN, Diagnosis::AMci, Diagnosis::DAT];

    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::CN => "CN",
            Diagnosis::AMci => "aMCI",
            Diagnosis::DAT => "DAT",
        }
    }

    /// Positive class for diagnosis experiments: anything but CN.
    pub fn is_impaired(self) -> bool {
        self != Diagnosis::CN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub timeseries_path: String,
    /// Scores ordered as the manifest's `score_names`.
    pub scores: Option<[f64; 3]>,
    pub diagnosis: Option<Diagnosis>,
    pub normative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortManifest {
    pub subjects: Vec<SubjectRecord>,
    pub tr_seconds: f64,
    pub score_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawManifest {
    tr_seconds: f64,
    #[serde(default = "default_score_names")]
    score_names: Vec<String>,
    subjects: Vec<RawSubject>,
}

#[derive(Serialize, Deserialize)]
struct RawSubject {
    subject_id: String,
    timeseries_path: String,
    #[serde(default)]
    scores: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    diagnosis: Option<Diagnosis>,
    #[serde(default)]
    normative: bool,
}

fn default_score_names() -> Vec<String> {
    DEFAULT_SCORE_NAMES.map(String::from).to_vec()
}

impl CohortManifest {
    pub fn from_json_str(text: &str, path: &Path) -> Result<Self> {
        let raw: RawManifest = serde_json::from_str(text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if raw.score_names.len() != 3 {
            return Err(Error::Json {
                path: path.to_path_buf(),
                message: format!("expected 3 score_names, got {}", raw.score_names.len()),
            });
        }
        let mut subjects = Vec::with_capacity(raw.subjects.len());
        for s in raw.subjects {
            let scores = match s.scores {
                None => None,
                Some(map) => {
                    let mut out = [0.0; 3];
                    for (k, name) in raw.score_names.iter().enumerate() {
                        out[k] = *map.get(name).ok_or_else(|| Error::Json {
                            path: path.to_path_buf(),
                            message: format!("subject '{}' lacks score '{name}'", s.subject_id),
                        })?;
                        if !out[k].is_finite() {
                            return Err(Error::Json {
                                path: path.to_path_buf(),
                                message: format!("subject '{}' has a non-finite score", s.subject_id),
                            });
                        }
                    }
                    Some(out)
                }
            };
            subjects.push(SubjectRecord {
                subject_id: s.subject_id,
                timeseries_path: s.timeseries_path,
                scores,
                diagnosis: s.diagnosis,
                normative: s.normative,
            });
        }
        let manifest = CohortManifest {
            subjects,
            tr_seconds: raw.tr_seconds,
            score_names: raw.score_names,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawManifest {
            tr_seconds: self.tr_seconds,
            score_names: self.score_names.clone(),
            subjects: self
                .subjects
                .iter()
                .map(|s| RawSubject {
                    subject_id: s.subject_id.clone(),
                    timeseries_path: s.timeseries_path.clone(),
                    scores: s.scores.map(|v| {
                        self.score_names.iter().cloned().zip(v).collect::<BTreeMap<_, _>>()
                    }),
                    diagnosis: s.diagnosis,
                    normative: s.normative,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tr_seconds > 0.0 && self.tr_seconds.is_finite()) {
            return Err(Error::Invalid(format!(
                "tr_seconds must be positive, got {}",
                self.tr_seconds
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.subjects {
            if !seen.insert(s.subject_id.as_str()) {
                return Err(Error::Invalid(format!("duplicate subject_id '{}'", s.subject_id)));
            }
            if s.normative && s.diagnosis.is_some_and(|d| d != Diagnosis::CN) {
                return Err(Error::Invalid(format!(
                    "subject '{}' is normative but not CN",
                    s.subject_id
                )));
            }
        }
        Ok(())
    }
}

/// A manifest together with its loaded timeseries, in manifest order.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub manifest: CohortManifest,
    pub timeseries: Vec<ParcellatedTimeseries>,
}

impl Cohort {
    pub fn new(manifest: CohortManifest, timeseries: Vec<ParcellatedTimeseries>) -> Result<Self> {
        manifest.validate()?;
        if manifest.subjects.len() != timeseries.len() {
            return Err(Error::Shape(format!(
                "{} subjects but {} timeseries",
                manifest.subjects.len(),
                timeseries.len()
            )));
        }
        if let Some(first) = timeseries.first() {
            let (t, b) = first.values.dim();
            for ts in &timeseries {
                if ts.n_regions() != b {
                    return Err(Error::Shape(format!(
                        "subject '{}' has {} regions, cohort has {b}",
                        ts.subject_id,
                        ts.n_regions()
                    )));
                }
                if ts.n_timepoints() != t {
                    return Err(Error::Shape(format!(
                        "subject '{}' has {} time samples, cohort has {t}",
                        ts.subject_id,
                        ts.n_timepoints()
                    )));
                }
            }
        }
        Ok(Self {
            manifest,
            timeseries,
        })
    }

    pub fn len(&self) -> usize {
        self.timeseries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timeseries.is_empty()
    }

    pub fn n_regions(&self) -> usize {
        self.timeseries.first().map_or(0, |t| t.n_regions())
    }

    pub fn n_timepoints(&self) -> usize {
        self.timeseries.first().map_or(0, |t| t.n_timepoints())
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.manifest.subjects.iter().map(|s| s.subject_id.clone()).collect()
    }

    pub fn region_labels(&self) -> Vec<String> {
        self.timeseries
            .first()
            .map(|t| t.region_labels.clone())
            .unwrap_or_default()
    }

    /// N x 3 score matrix; every subject must have scores.
    pub fn score_matrix(&self) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.len(), 3));
        for (i, s) in self.manifest.subjects.iter().enumerate() {
            let scores = s.scores.ok_or_else(|| {
                Error::Invalid(format!("subject '{}' has no scores", s.subject_id))
            })?;
            for k in 0..3 {
                out[[i, k]] = scores[k];
            }
        }
        Ok(out)
    }

    pub fn diagnoses(&self) -> Vec<Option<Diagnosis>> {
        self.manifest.subjects.iter().map(|s| s.diagnosis).collect()
    }

    /// Sub-cohort with the given subject indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Cohort {
        Cohort {
            manifest: CohortManifest {
                subjects: indices.iter().map(|&i| self.manifest.subjects[i].clone()).collect(),
                tr_seconds: self.manifest.tr_seconds,
                score_names: self.manifest.score_names.clone(),
            },
            timeseries: indices.iter().map(|&i| self.timeseries[i].clone()).collect(),
        }
    }

    /// Replaces the manifest (e.g. after z-scoring), keeping the data.
    pub fn with_manifest(mut self, manifest: CohortManifest) -> Result<Self> {
        if manifest.subjects.len() != self.timeseries.len() {
            return Err(Error::Shape("manifest/timeseries count mismatch".into()));
        }
        self.manifest = manifest;
        Ok(self)
    }
}

/// Loads a manifest and every timeseries it references. Relative paths are
/// resolved against the manifest's directory.
pub fn load_cohort(manifest_path: impl AsRef<Path>) -> Result<Cohort> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest = CohortManifest::from_json_str(&text, manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut timeseries = Vec::with_capacity(manifest.subjects.len());
    for s in &manifest.subjects {
        let path = base.join(&s.timeseries_path);
        let (labels, values) = read_timeseries_csv(&path)?;
        if let Some(first) = timeseries.first() {
            let first: &ParcellatedTimeseries = first;
            if values.ncols() != first.n_regions() {
                return Err(Error::Shape(format!(
                    "{}: {} regions, cohort has {}",
                    path.display(),
                    values.ncols(),
                    first.n_regions()
                )));
            }
        }
        timeseries.push(ParcellatedTimeseries::new(
            s.subject_id.clone(),
            values,
            manifest.tr_seconds,
            labels,
        )?);
    }
    Cohort::new(manifest, timeseries)
}

/// Reads a timeseries CSV: header row of region labels, then one row per
/// time sample. Row indices in errors count data rows from 0.
pub fn read_timeseries_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let labels: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let b = labels.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        if record.len() != b {
            return Err(Error::Format {
                path: path.to_path_buf(),
                row,
                message: format!("expected {b} columns, found {}", record.len()),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                row,
                message: format!("column {col}: cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    path: path.to_path_buf(),
                    row,
                    col,
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    let values = Array2::from_shape_vec((rows, b), data).expect("row-major buffer matches shape");
    Ok((labels, values))
}

/// Writes values with 9 significant digits.
pub fn write_timeseries_csv(path: &Path, labels: &[String], values: &Array2<f64>) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 16);
    out.push_str(&labels.join(","));
    out.push('\n');
    for row in values.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `manifest_name` into `dir` plus one CSV per subject at the
/// subject's `timeseries_path` (relative to `dir`).
pub fn save_cohort(cohort: &Cohort, dir: &Path, manifest_name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (record, ts) in cohort.manifest.subjects.iter().zip(&cohort.timeseries) {
        write_timeseries_csv(&dir.join(&record.timeseries_path), &ts.region_labels, &ts.values)?;
    }
    let path = dir.join(manifest_name);
    fs::write(&path, cohort.manifest.to_json_string()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    fn manifest_json(paths: &[&str]) -> String {
        let subjects: Vec<String> = paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                format!(
                    r#"{{"subject_id":"s{i}","timeseries_path":"{p}","scores":{{"moca":{i},"memory":0.5,"language":-0.5}},"diagnosis":"CN","normative":true}}"#
                )
            })
            .collect();
        format!(
            r#"{{"tr_seconds":0.8,"score_names":["moca","memory","language"],"subjects":[{}]}}"#,
            subjects.join(",")
        )
    }

    fn csv(t: usize, b: usize) -> String {
        let mut s = (0..b).map(|j| format!("r{j}")).collect::<Vec<_>>().join(",") + "\n";
        for i in 0..t {
            s += &(0..b).map(|j| format!("{}", (i * b + j) as f64 * 0.5)).collect::<Vec<_>>().join(",");
            s += "\n";
        }
        s
    }

    #[test]
    fn loads_two_subjects() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", &csv(8, 4));
        write(dir.path(), "b.csv", &csv(8, 4));
        write(dir.path(), "m.json", &manifest_json(&["a.csv", "b.csv"]));
        let cohort = load_cohort(dir.path().join("m.json")).unwrap();
        assert_eq!(cohort.len(), 2);
        assert_eq!(cohort.n_timepoints(), 8);
        assert_eq!(cohort.n_regions(), 4);
        assert_eq!(cohort.timeseries[1].values[[2, 3]], 5.5);
        assert_eq!(cohort.manifest.subjects[1].scores, Some([1.0, 0.5, -0.5]));
    }

    #[test]
    fn column_count_mismatch_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", &csv(8, 4));
        write(dir.path(), "b.csv", &csv(8, 3));
        write(dir.path(), "m.json", &manifest_json(&["a.csv", "b.csv"]));
        let err = load_cohort(dir.path().join("m.json")).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "{err}");
    }

    #[test]
    fn nan_cell_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("r0,r1,r2,r3\n");
        for t in 0..8 {
            let row: Vec<String> = (0..4)
                .map(|b| if t == 5 && b == 2 { "NaN".into() } else { "1.0".into() })
                .collect();
            text += &(row.join(",") + "\n");
        }
        write(dir.path(), "a.csv", &text);
        write(dir.path(), "m.json", &manifest_json(&["a.csv"]));
        match load_cohort(dir.path().join("m.json")).unwrap_err() {
            Error::NonFinite { row, col, .. } => assert_eq!((row, col), (5, 2)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ragged_row_reports_index() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", "r0,r1,r2\n1,2,3\n4,5\n7,8,9\n");
        write(dir.path(), "m.json", &manifest_json(&["a.csv"]));
        match load_cohort(dir.path().join("m.json")).unwrap_err() {
            Error::Format { row, .. } => assert_eq!(row, 1),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "m.json", &manifest_json(&["nope.csv"]));
        let err = load_cohort(dir.path().join("m.json")).unwrap_err();
        assert!(err.to_string().contains("nope.csv"), "{err}");
    }

    #[test]
    fn duplicate_subject_ids_rejected() {
        let text = r#"{"tr_seconds":1.0,"subjects":[
            {"subject_id":"a","timeseries_path":"a.csv","normative":false},
            {"subject_id":"a","timeseries_path":"b.csv","normative":false}]}"#;
        assert!(CohortManifest::from_json_str(text, Path::new("m.json")).is_err());
    }

    #[test]
    fn save_and_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let values = Array2::from_shape_fn((5, 3), |(t, b)| (t as f64 + 1.0) * 1.234567891e-3 * (b as f64 - 1.3));
        let labels = vec!["a".to_string(), "b".into(), "c".into()];
        let ts = ParcellatedTimeseries::new("x", values.clone(), 2.0, labels).unwrap();
        let manifest = CohortManifest {
            subjects: vec![SubjectRecord {
                subject_id: "x".into(),
                timeseries_path: "ts/x.csv".into(),
                scores: None,
                diagnosis: Some(Diagnosis::AMci),
                normative: false,
            }],
            tr_seconds: 2.0,
            score_names: default_score_names(),
        };
        let cohort = Cohort::new(manifest, vec![ts]).unwrap();
        let path = save_cohort(&cohort, dir.path(), "manifest.json").unwrap();
        let back = load_cohort(path).unwrap();
        assert_eq!(back.manifest, cohort.manifest);
        for (a, b) in back.timeseries[0].values.iter().zip(values.iter()) {
            assert!((a - b).abs() <= 1e-7 * b.abs());
        }
    }
}
