//! Cohort ingestion, normative score z-scoring and synthetic cohorts.

mod cohort;
mod synthetic;

pub use cohort::{
    load_cohort, read_timeseries_csv, save_cohort, write_timeseries_csv, Cohort,
    CohortManifest, Diagnosis, ParcellatedTimeseries, SubjectRecord, DEFAULT_SCORE_NAMES,
};
pub use synthetic::{
    generate_synthetic, lag1_autocorrelation, write_synthetic, GroundTruth, SyntheticMode,
    SyntheticSpec,
};

use crate::error::{Error, Result};

/// Mean and sample standard deviation of each score over the normative
/// (healthy reference) subjects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormativeStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

pub fn normative_stats(manifest: &CohortManifest) -> Result<NormativeStats> {
    let reference: Vec<[f64; 3]> = manifest
        .subjects
        .iter()
        .filter(|s| s.normative)
        .filter_map(|s| s.scores)
        .collect();
    let mut stats = NormativeStats {
        mean: [0.0; 3],
        std: [0.0; 3],
    };
    for k in 0..3 {
        let name = manifest.score_names[k].clone();
        if reference.len() < 2 {
            return Err(Error::DegenerateNormative {
                score: name,
                reason: format!(
                    "need at least 2 normative subjects with scores, found {}",
                    reference.len()
                ),
            });
        }
        let n = reference.len() as f64;
        let mean = reference.iter().map(|s| s[k]).sum::<f64>() / n;
        let var = reference.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Relative floor: values equal up to round-off count as constant.
        if var.sqrt() <= 1e-12 * mean.abs().max(1.0) {
            return Err(Error::DegenerateNormative {
                score: name,
                reason: "all normative values are equal".into(),
            });
        }
        stats.mean[k] = mean;
        stats.std[k] = var.sqrt();
    }
    Ok(stats)
}

/// Converts every subject's scores to z-scores relative to the normative
/// subjects: `(raw - mean_norm) / std_norm`, sample standard deviation.
pub fn zscore_scores(manifest: &CohortManifest) -> Result<CohortManifest> {
    let stats = normative_stats(manifest)?;
    let mut out = manifest.clone();
    for subject in &mut out.subjects {
        if let Some(scores) = subject.scores.as_mut() {
            for k in 0..3 {
                scores[k] = (scores[k] - stats.mean[k]) / stats.std[k];
            }
        }
    }
    Ok(out)
}
