use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::dataio::Diagnosis;
use crate::error::{Error, Result};
use crate::rng;

use super::metrics::{pearson_r_p, rmse, RocCurve};

/// Per-score agreement between true and predicted scores.
///
/// A correlation is `None` when it is undefined (constant predictions or
/// fewer than three subjects).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMetrics {
    pub n_subjects: usize,
    pub pearson_r: Vec<Option<f64>>,
    pub p_value: Vec<Option<f64>>,
    pub rmse: Vec<f64>,
}

/// Pearson r, permutation p-value and RMSE for every score column.
pub fn score_metrics(
    truth: ArrayView2<f64>,
    pred: ArrayView2<f64>,
    n_perm: usize,
    seed: u64,
) -> Result<ScoreMetrics> {
    if truth.dim() != pred.dim() {
        return Err(Error::Shape(format!(
            "truth {:?} vs predictions {:?}",
            truth.dim(),
            pred.dim()
        )));
    }
    let mut metrics = ScoreMetrics {
        n_subjects: truth.nrows(),
        pearson_r: Vec::new(),
        p_value: Vec::new(),
        rmse: Vec::new(),
    };
    for c in 0..truth.ncols() {
        let seed = rng::substream(seed, c as u64);
        match pearson_r_p(truth.column(c), pred.column(c), n_perm, seed) {
            Ok((r, p)) => {
                metrics.pearson_r.push(Some(r));
                metrics.p_value.push(Some(p));
            }
            Err(Error::DegenerateCorrelation(_)) => {
                metrics.pearson_r.push(None);
                metrics.p_value.push(None);
            }
            Err(e) => return Err(e),
        }
        metrics.rmse.push(rmse(truth.column(c), pred.column(c))?);
    }
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub subject_id: String,
    pub diagnosis: Option<Diagnosis>,
    pub truth: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    /// What counts as positive, e.g. "impaired (aMCI or DAT)".
    pub positive_class: String,
    pub curve: RocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub score_names: Vec<String>,
    pub overall: ScoreMetrics,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub subgroups: BTreeMap<String, ScoreMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfi: Option<crate::analysis::PfiReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub predictions: Vec<PredictionRow>,
}

impl EvaluationReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<report>".into(),
            message: e.to_string(),
        })
    }
}
