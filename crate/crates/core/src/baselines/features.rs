use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{alff_features, fcm_features, group_ica_features, ica_features_individual, IcaConfig};
use crate::dataio::Cohort;
use crate::error::{Error, Result};

/// N x D subject-by-feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
    pub subject_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn from_rows(
        rows: Vec<Array1<f64>>,
        feature_names: Vec<String>,
        subject_ids: Vec<String>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if rows.len() != subject_ids.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} subjects",
                rows.len(),
                subject_ids.len()
            )));
        }
        let mut values = Array2::zeros((rows.len(), d));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Shape(format!(
                    "subject '{}' has {} features, expected {d}",
                    subject_ids[i],
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite feature for subject '{}'",
                    subject_ids[i]
                )));
            }
            values.row_mut(i).assign(row);
        }
        Ok(Self {
            values,
            feature_names,
            subject_ids,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Rows reordered to follow `subject_ids`.
    pub fn aligned_to(&self, subject_ids: &[String]) -> Result<FeatureMatrix> {
        let mut values = Array2::zeros((subject_ids.len(), self.n_features()));
        for (i, id) in subject_ids.iter().enumerate() {
            let row = self
                .subject_ids
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::Invalid(format!("no feature row for subject '{id}'")))?;
            values.row_mut(i).assign(&self.values.row(row));
        }
        Ok(FeatureMatrix {
            values,
            feature_names: self.feature_names.clone(),
            subject_ids: subject_ids.to_vec(),
        })
    }

    /// CSV with header `subject_id,<feature names>`, one row per subject.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("subject_id");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (id, row) in self.subject_ids.iter().zip(self.values.rows()) {
            out.push_str(id);
            for v in row {
                out.push_str(&format!(",{v:.8e}"));
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Format {
            path: path.to_path_buf(),
            row: 0,
            message: e.to_string(),
        })?;
        let feature_names: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Format {
                path: path.to_path_buf(),
                row,
                message: e.to_string(),
            })?;
            if record.len() != feature_names.len() + 1 {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    row,
                    message: format!(
                        "expected {} columns, found {}",
                        feature_names.len() + 1,
                        record.len()
                    ),
                });
            }
            ids.push(record[0].to_string());
            let mut values = Vec::with_capacity(feature_names.len());
            for (col, cell) in record.iter().skip(1).enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Format {
                    path: path.to_path_buf(),
                    row,
                    message: format!("cannot parse '{cell}'"),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        path: path.to_path_buf(),
                        row,
                        col,
                    });
                }
                values.push(v);
            }
            rows.push(Array1::from(values));
        }
        Self::from_rows(rows, feature_names, ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum FeatureMethod {
    Fcm,
    IndividualIca { n_components: usize, seed: u64 },
    GroupIca { n_components: usize, seed: u64 },
    Alff { f_lo: f64, f_hi: f64 },
}

pub fn extract_features(cohort: &Cohort, method: FeatureMethod) -> Result<FeatureMatrix> {
    match method {
        FeatureMethod::Fcm => fcm_features(cohort),
        FeatureMethod::IndividualIca { n_components, seed } => {
            let config = IcaConfig::new(n_components).with_seed(seed);
            let rows = cohort
                .timeseries
                .iter()
                .map(|ts| ica_features_individual(ts, &config))
                .collect::<Result<Vec<_>>>()?;
            FeatureMatrix::from_rows(rows, super::ica::feature_names(n_components), cohort.subject_ids())
        }
        FeatureMethod::GroupIca { n_components, seed } => {
            let config = IcaConfig::new(n_components).with_seed(seed);
            Ok(group_ica_features(&cohort.timeseries, &config)?.0)
        }
        FeatureMethod::Alff { f_lo, f_hi } => alff_features(cohort, f_lo, f_hi),
    }
}
