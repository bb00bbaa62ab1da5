//! Permutation feature importance on the pooled region vector, and report
//! assembly.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Cohort, Diagnosis};
use crate::error::{Error, Result};
use crate::model::{HeadKind, NeuroMamba};
use crate::real::Real;
use crate::regression::{score_metrics, EvaluationReport, PredictionRow, RocSummary};
use crate::rng::{self, tags};

/// JSON schema of [`EvaluationReport`] files.
pub const REPORT_SCHEMA: &str = include_str!("../schema/evaluation_report.schema.json");

/// Subgroups smaller than this get a warning instead of metrics.
pub const MIN_SUBGROUP: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub region: usize,
    pub label: String,
    pub delta_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfiReport {
    pub n_trials: usize,
    pub seed: u64,
    pub score_names: Vec<String>,
    pub region_labels: Vec<String>,
    pub baseline_rmse: Vec<f64>,
    /// `[score][region]` mean increase in RMSE over the trials.
    pub delta_rmse: Vec<Vec<f64>>,
    /// `[score][region]` Monte-Carlo standard error of `delta_rmse`.
    pub std_error: Vec<Vec<f64>>,
    /// One ranking per score.
    pub rankings: Vec<Vec<RankEntry>>,
    /// Ranking by the mean ΔRMSE across scores.
    pub combined_ranking: Vec<RankEntry>,
}

impl PfiReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Ranking table with columns rank, region, label, one ΔRMSE column per
    /// score and the combined value, plus any extra metadata columns keyed by
    /// region label.
    pub fn ranking_csv(&self, metadata: Option<&RegionMetadata>) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["rank".to_string(), "region".into(), "label".into()];
        header.extend(self.score_names.iter().map(|s| format!("delta_rmse_{s}")));
        header.push("delta_rmse_combined".into());
        if let Some(m) = metadata {
            header.extend(m.columns.iter().cloned());
        }
        w.write_record(&header).expect("in-memory write");
        for e in &self.combined_ranking {
            let mut row = vec![e.rank.to_string(), e.region.to_string(), e.label.clone()];
            row.extend(self.delta_rmse.iter().map(|d| d[e.region].to_string()));
            row.push(e.delta_rmse.to_string());
            if let Some(m) = metadata {
                match m.rows.get(&e.label) {
                    Some(values) => row.extend(values.iter().cloned()),
                    None => row.extend(m.columns.iter().map(|_| String::new())),
                }
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// User-supplied per-region table (e.g. MNI coordinates and anatomical
/// names). The first column must hold the region label.
#[derive(Debug, Clone, Default)]
pub struct RegionMetadata {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, Vec<String>>,
}

impl RegionMetadata {
    pub fn from_csv(text: &str, path: &std::path::Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| Error::Format {
            path: path.into(),
            row: 0,
            message: e.to_string(),
        })?;
        if header.is_empty() {
            return Err(Error::Format {
                path: path.into(),
                row: 0,
                message: "empty header".into(),
            });
        }
        let columns = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = BTreeMap::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format {
                path: path.into(),
                row: i,
                message: e.to_string(),
            })?;
            let mut it = rec.iter();
            let label = it.next().unwrap_or_default().to_string();
            rows.insert(label, it.map(str::to_string).collect());
        }
        Ok(RegionMetadata { columns, rows })
    }
}

/// Descending by value, ties by region index.
fn rank(values: &[f64], labels: &[String]) -> Vec<RankEntry> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
        .into_iter()
        .enumerate()
        .map(|(r, j)| RankEntry {
            rank: r + 1,
            region: j,
            label: labels[j].clone(),
            delta_rmse: values[j],
        })
        .collect()
}

fn rmse_columns(truth: ArrayView2<f64>, pred: &Array2<f64>) -> Vec<f64> {
    (0..truth.ncols())
        .map(|c| {
            let n = truth.nrows() as f64;
            let ss: f64 = truth
                .column(c)
                .iter()
                .zip(pred.column(c))
                .map(|(t, p)| (t - p) * (t - p))
                .sum();
            (ss / n).sqrt()
        })
        .collect()
}

fn apply_head<H>(head: &H, h: ArrayView2<f64>, n_scores: usize) -> Result<Array2<f64>>
where
    H: Fn(ArrayView1<f64>) -> Result<Array1<f64>> + Sync,
{
    let mut out = Array2::zeros((h.nrows(), n_scores));
    for (i, row) in h.rows().into_iter().enumerate() {
        let y = head(row)?;
        if y.len() != n_scores {
            return Err(Error::Shape(format!("head gave {} outputs for {n_scores} scores", y.len())));
        }
        out.row_mut(i).assign(&y);
    }
    Ok(out)
}

/// PFI on precomputed pooled vectors `h` (N x B) with a head mapping one
/// pooled vector to the score predictions.
///
/// Trial `t` draws one subject permutation from `(seed, t)` and applies it to
/// each region in turn, so relabeling the regions permutes the result exactly.
pub fn pfi_from_embeddings<H>(
    h: ArrayView2<f64>,
    truth: ArrayView2<f64>,
    head: H,
    n_trials: usize,
    seed: u64,
    score_names: &[String],
    region_labels: &[String],
) -> Result<PfiReport>
where
    H: Fn(ArrayView1<f64>) -> Result<Array1<f64>> + Sync,
{
    let (n, b) = h.dim();
    let s = truth.ncols();
    if n_trials == 0 {
        return Err(Error::Invalid("PFI needs at least one trial".into()));
    }
    if truth.nrows() != n || n < 2 {
        return Err(Error::Shape(format!("{n} embeddings for {} targets", truth.nrows())));
    }
    if score_names.len() != s || region_labels.len() != b {
        return Err(Error::Shape(format!(
            "{} score names for {s} scores, {} labels for {b} regions",
            score_names.len(),
            region_labels.len()
        )));
    }
    let baseline = rmse_columns(truth, &apply_head(&head, h, s)?);
    let perms: Vec<Vec<usize>> = (0..n_trials)
        .map(|t| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng::seeded(rng::tagged(seed, tags::PFI, t as u64)));
            p
        })
        .collect();
    // [region * n_trials + trial] -> RMSE per score
    let trials: Vec<Vec<f64>> = (0..b * n_trials)
        .into_par_iter()
        .map(|job| {
            let (j, t) = (job / n_trials, job % n_trials);
            let mut shuffled = h.to_owned();
            for (i, &src) in perms[t].iter().enumerate() {
                shuffled[[i, j]] = h[[src, j]];
            }
            Ok(rmse_columns(truth, &apply_head(&head, shuffled.view(), s)?))
        })
        .collect::<Result<_>>()?;

    let mut delta = vec![vec![0.0; b]; s];
    let mut std_error = vec![vec![0.0; b]; s];
    for j in 0..b {
        let runs = &trials[j * n_trials..(j + 1) * n_trials];
        for c in 0..s {
            let mean = runs.iter().map(|r| r[c]).sum::<f64>() / n_trials as f64;
            let var = if n_trials > 1 {
                runs.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / (n_trials - 1) as f64
            } else {
                0.0
            };
            delta[c][j] = mean - baseline[c];
            std_error[c][j] = (var / n_trials as f64).sqrt();
        }
    }
    let combined: Vec<f64> = (0..b)
        .map(|j| delta.iter().map(|d| d[j]).sum::<f64>() / s as f64)
        .collect();
    Ok(PfiReport {
        n_trials,
        seed,
        score_names: score_names.to_vec(),
        region_labels: region_labels.to_vec(),
        baseline_rmse: baseline,
        rankings: delta.iter().map(|d| rank(d, region_labels)).collect(),
        combined_ranking: rank(&combined, region_labels),
        delta_rmse: delta,
        std_error,
    })
}

/// Pooled vectors of every subject, N x B.
pub fn embed_cohort<F: Real>(model: &NeuroMamba<F>, cohort: &Cohort) -> Result<Array2<f64>> {
    let rows: Vec<Array1<F>> = cohort
        .timeseries
        .par_iter()
        .map(|ts| model.embed(ts.values.mapv(F::of).view()))
        .collect::<Result<_>>()?;
    let mut h = Array2::zeros((rows.len(), cohort.n_regions()));
    for (i, r) in rows.iter().enumerate() {
        h.row_mut(i).assign(&r.mapv(|v| v.f64()));
    }
    Ok(h)
}

/// PFI of a regression model against the cohort's scores. The backbone runs
/// once per subject; trials only re-evaluate the head.
pub fn pfi<F: Real>(model: &NeuroMamba<F>, cohort: &Cohort, n_trials: usize, seed: u64) -> Result<PfiReport> {
    if model.config.head != HeadKind::Regression {
        return Err(Error::Invalid("PFI needs a regression-head model".into()));
    }
    let truth = cohort.score_matrix()?;
    let h = embed_cohort(model, cohort)?;
    let head_model = model.cast::<f64>();
    pfi_from_embeddings(
        h.view(),
        truth.view(),
        |row| head_model.head_output(row, None),
        n_trials,
        seed,
        &cohort.manifest.score_names,
        &cohort.region_labels(),
    )
}

/// Inputs of [`assemble_report`].
pub struct ReportInputs<'a> {
    pub method: &'a str,
    pub score_names: &'a [String],
    pub subject_ids: &'a [String],
    /// Per-subject diagnosis; subgroups are reported when any is present.
    pub diagnoses: Option<&'a [Option<Diagnosis>]>,
    pub truth: ArrayView2<'a, f64>,
    pub predicted: ArrayView2<'a, f64>,
    pub n_permutations: usize,
    pub seed: u64,
}

/// Overall and per-diagnosis metrics plus the prediction rows.
pub fn assemble_report(
    inputs: &ReportInputs,
    roc: Option<RocSummary>,
    pfi: Option<PfiReport>,
) -> Result<EvaluationReport> {
    let n = inputs.subject_ids.len();
    if inputs.truth.dim() != inputs.predicted.dim()
        || inputs.truth.nrows() != n
        || inputs.truth.ncols() != inputs.score_names.len()
        || inputs.diagnoses.is_some_and(|d| d.len() != n)
    {
        return Err(Error::Shape(format!(
            "{n} subjects, truth {:?}, predictions {:?}, {} score names",
            inputs.truth.dim(),
            inputs.predicted.dim(),
            inputs.score_names.len()
        )));
    }
    let overall = score_metrics(inputs.truth, inputs.predicted, inputs.n_permutations, inputs.seed)?;
    let mut subgroups = BTreeMap::new();
    let mut warnings = Vec::new();
    if let Some(diag) = inputs.diagnoses.filter(|d| d.iter().any(Option::is_some)) {
        let mut groups: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
        for (i, d) in diag.iter().enumerate() {
            if let Some(d) = d {
                groups.entry(d.as_str()).or_default().push(i);
            }
        }
        for (name, idx) in groups {
            if idx.len() < MIN_SUBGROUP {
                warnings.push(format!(
                    "subgroup '{name}' has {} subjects; metrics omitted",
                    idx.len()
                ));
                continue;
            }
            let t = inputs.truth.select(ndarray::Axis(0), &idx);
            let p = inputs.predicted.select(ndarray::Axis(0), &idx);
            subgroups.insert(
                name.to_string(),
                score_metrics(t.view(), p.view(), inputs.n_permutations, inputs.seed)?,
            );
        }
    }
    let predictions = (0..n)
        .map(|i| PredictionRow {
            subject_id: inputs.subject_ids[i].clone(),
            diagnosis: inputs.diagnoses.and_then(|d| d[i]),
            truth: inputs.truth.row(i).to_vec(),
            predicted: inputs.predicted.row(i).to_vec(),
        })
        .collect();
    Ok(EvaluationReport {
        method: inputs.method.to_string(),
        score_names: inputs.score_names.to_vec(),
        overall,
        subgroups,
        roc,
        pfi,
        warnings,
        predictions,
    })
}

/// Long-format scatter table: subject, score_name, true, pred, diagnosis.
pub fn scatter_csv(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject", "score_name", "true", "pred", "diagnosis"])
        .expect("in-memory write");
    for row in &report.predictions {
        for (c, name) in report.score_names.iter().enumerate() {
            let diagnosis = row.diagnosis.map(Diagnosis::as_str).unwrap_or("");
            w.write_record([
                row.subject_id.as_str(),
                name,
                &row.truth[c].to_string(),
                &row.predicted[c].to_string(),
                diagnosis,
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
