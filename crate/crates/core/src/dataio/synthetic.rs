use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::{
    save_cohort, Cohort, CohortManifest, Diagnosis, ParcellatedTimeseries, SubjectRecord,
    DEFAULT_SCORE_NAMES,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticMode {
    /// Signal only in lag-1 autocorrelation; static correlations are the
    /// identity for every subject.
    DynamicsOnly,
    /// Autocorrelation signal plus a score-dependent shared component among
    /// the informative regions.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub n_regions: usize,
    pub n_timepoints: usize,
    pub tr_seconds: f64,
    pub informative_regions: Vec<usize>,
    /// Strength of the score-to-dynamics coupling.
    pub coupling: f64,
    pub mode: SyntheticMode,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 4 {
            return Err(Error::Invalid("synthetic cohorts need at least 4 subjects".into()));
        }
        if self.n_regions < 2 || self.n_timepoints < 2 {
            return Err(Error::Invalid("need at least 2 regions and 2 time samples".into()));
        }
        if self.mode == SyntheticMode::DynamicsOnly && self.n_timepoints <= self.n_regions + 1 {
            return Err(Error::Invalid(
                "dynamics_only whitening needs more time samples than regions + 1".into(),
            ));
        }
        if !(self.coupling > 0.0) {
            return Err(Error::Invalid("coupling must be positive".into()));
        }
        if !(self.tr_seconds > 0.0) {
            return Err(Error::Invalid("tr_seconds must be positive".into()));
        }
        if let Some(&r) = self.informative_regions.iter().find(|&&r| r >= self.n_regions) {
            return Err(Error::Invalid(format!(
                "informative region {r} out of range for {} regions",
                self.n_regions
            )));
        }
        Ok(())
    }
}

/// Planted truth for a synthetic cohort, written next to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub subject_ids: Vec<String>,
    /// Latent score `s` per subject (equals the raw primary score).
    pub latent_scores: Vec<f64>,
    pub informative_regions: Vec<usize>,
    pub mode: SyntheticMode,
    pub coupling: f64,
    pub seed: u64,
}

const NOISE_RHO: f64 = 0.3;
const NOISE_STD: f64 = 0.5;

/// Lag-1 coefficient planted in informative regions for latent score `s`.
pub fn planted_rho(coupling: f64, s: f64) -> f64 {
    (0.3 + coupling * s).clamp(-0.95, 0.95)
}

fn diagnosis_for(s: f64) -> Diagnosis {
    if s >= -0.5 {
        Diagnosis::CN
    } else if s >= -1.25 {
        Diagnosis::AMci
    } else {
        Diagnosis::DAT
    }
}

fn ar1(rng: &mut rng::Rng, rho: f64, t: usize) -> Vec<f64> {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(t);
    let mut x: f64 = rng.sample(StandardNormal);
    out.push(x);
    for _ in 1..t {
        let e: f64 = rng.sample(StandardNormal);
        x = rho * x + innovation * e;
        out.push(x);
    }
    out
}

fn normalize_columns(x: &mut Array2<f64>) {
    for mut col in x.axis_iter_mut(Axis(1)) {
        let m = linalg::mean(col.view());
        let sd = linalg::variance(col.view()).sqrt();
        col.mapv_inplace(|v| (v - m) / sd);
    }
}

struct SubjectDraw {
    latent: f64,
    scores: [f64; 3],
    values: Array2<f64>,
}

fn draw_subject(spec: &SyntheticSpec, index: usize) -> Result<SubjectDraw> {
    let mut rng = rng::seeded(rng::substream(spec.seed, index as u64));
    let (t, b) = (spec.n_timepoints, spec.n_regions);
    let s: f64 = rng.random_range(-2.0..2.0);
    let memory = s + 0.3 * rng.sample::<f64, _>(StandardNormal);
    let language = 0.8 * s - 0.1 + 0.3 * rng.sample::<f64, _>(StandardNormal);

    let rho = planted_rho(spec.coupling, s);
    let shared = ar1(&mut rng, NOISE_RHO, t);
    let loading = (spec.coupling * (s + 2.0) / 2.0).clamp(0.0, 0.9);
    let mut values = Array2::zeros((t, b));
    for region in 0..b {
        let informative = spec.informative_regions.contains(&region);
        let column: Vec<f64> = if informative {
            let own = ar1(&mut rng, rho, t);
            match spec.mode {
                SyntheticMode::DynamicsOnly => own,
                SyntheticMode::Mixed => {
                    let w = (1.0 - loading * loading).sqrt();
                    own.iter().zip(&shared).map(|(o, c)| w * o + loading * c).collect()
                }
            }
        } else {
            let own = ar1(&mut rng, NOISE_RHO, t);
            own.into_iter()
                .map(|v| v + NOISE_STD * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        values.column_mut(region).assign(&ArrayView1::from(&column));
    }

    match spec.mode {
        SyntheticMode::DynamicsOnly => {
            // Symmetric whitening: the sample covariance becomes exactly the
            // identity, so static correlations carry no score information.
            let centered = &values - &linalg::column_means(values.view()).insert_axis(Axis(0));
            let cov = linalg::sample_covariance(values.view());
            let w = linalg::inv_sqrt_spd(cov.view())?;
            values = centered.dot(&w);
            normalize_columns(&mut values);
        }
        SyntheticMode::Mixed => normalize_columns(&mut values),
    }
    Ok(SubjectDraw {
        latent: s,
        scores: [s, memory, language],
        values,
    })
}

/// Generates a cohort whose primary score is planted in the lag-1
/// autocorrelation of the informative regions. Deterministic given the seed
/// and independent of the thread count.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Cohort, GroundTruth)> {
    spec.validate()?;
    let draws: Vec<SubjectDraw> = (0..spec.n_subjects)
        .into_par_iter()
        .map(|i| draw_subject(spec, i))
        .collect::<Result<_>>()?;
    let labels: Vec<String> = (0..spec.n_regions).map(|b| format!("R{b:03}")).collect();
    let mut subjects = Vec::with_capacity(spec.n_subjects);
    let mut timeseries = Vec::with_capacity(spec.n_subjects);
    for (i, draw) in draws.iter().enumerate() {
        let id = format!("sub-{i:03}");
        let diagnosis = diagnosis_for(draw.latent);
        subjects.push(SubjectRecord {
            subject_id: id.clone(),
            timeseries_path: format!("timeseries/{id}.csv"),
            scores: Some(draw.scores),
            diagnosis: Some(diagnosis),
            normative: diagnosis == Diagnosis::CN,
        });
        timeseries.push(ParcellatedTimeseries::new(
            id,
            draw.values.clone(),
            spec.tr_seconds,
            labels.clone(),
        )?);
    }
    let manifest = CohortManifest {
        subjects,
        tr_seconds: spec.tr_seconds,
        score_names: DEFAULT_SCORE_NAMES.map(String::from).to_vec(),
    };
    let truth = GroundTruth {
        subject_ids: manifest.subjects.iter().map(|s| s.subject_id.clone()).collect(),
        latent_scores: draws.iter().map(|d| d.latent).collect(),
        informative_regions: spec.informative_regions.clone(),
        mode: spec.mode,
        coupling: spec.coupling,
        seed: spec.seed,
    };
    Ok((Cohort::new(manifest, timeseries)?, truth))
}

/// Writes `manifest.json`, `timeseries/*.csv` and `ground_truth.json` into `dir`.
pub fn write_synthetic(cohort: &Cohort, truth: &GroundTruth, dir: &Path) -> Result<()> {
    save_cohort(cohort, dir, "manifest.json")?;
    let path = dir.join("ground_truth.json");
    let text = serde_json::to_string_pretty(truth).expect("ground truth serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Sample lag-1 autocorrelation.
pub fn lag1_autocorrelation(x: ArrayView1<f64>) -> f64 {
    let m = linalg::mean(x);
    let denom: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let num: f64 = x
        .iter()
        .zip(x.iter().skip(1))
        .map(|(a, b)| (a - m) * (b - m))
        .sum();
    num / denom
}
