use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::FeatureMatrix;
use crate::dataio::{Cohort, ParcellatedTimeseries};
use crate::error::{Error, Result};

/// Pearson correlation matrix between regions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    pub subject_id: String,
    pub values: Array2<f64>,
}

pub fn fcm(ts: &ParcellatedTimeseries) -> Result<ConnectivityMatrix> {
    let x = &ts.values;
    let (t, b) = x.dim();
    let mut centered = x.clone();
    let mut sd = Array1::zeros(b);
    for (j, mut col) in centered.columns_mut().into_iter().enumerate() {
        let m = col.sum() / t as f64;
        col.mapv_inplace(|v| v - m);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        if !(ss > 0.0) {
            return Err(Error::DegenerateRegion {
                region: ts.region_labels[j].clone(),
            });
        }
        sd[j] = ss.sqrt();
    }
    let gram = centered.t().dot(&centered);
    let mut values = Array2::zeros((b, b));
    for j in 0..b {
        values[[j, j]] = 1.0;
        for k in j + 1..b {
            let r = (gram[[j, k]] / (sd[j] * sd[k])).clamp(-1.0, 1.0);
            values[[j, k]] = r;
            values[[k, j]] = r;
        }
    }
    Ok(ConnectivityMatrix {
        subject_id: ts.subject_id.clone(),
        values,
    })
}

/// Strict upper triangle in row-major order: (0,1), (0,2), ..., (1,2), ...
pub fn vectorize_upper(c: &ConnectivityMatrix) -> Array1<f64> {
    let b = c.values.nrows();
    let mut out = Vec::with_capacity(b * (b - 1) / 2);
    for j in 0..b {
        for k in j + 1..b {
            out.push(c.values[[j, k]]);
        }
    }
    Array1::from(out)
}

pub(crate) fn pair_names(labels: &[String]) -> Vec<String> {
    let mut names = Vec::new();
    for j in 0..labels.len() {
        for k in j + 1..labels.len() {
            names.push(format!("{}~{}", labels[j], labels[k]));
        }
    }
    names
}

pub fn fcm_features(cohort: &Cohort) -> Result<FeatureMatrix> {
    let rows: Vec<Array1<f64>> = cohort
        .timeseries
        .par_iter()
        .map(|ts| fcm(ts).map(|c| vectorize_upper(&c)))
        .collect::<Result<_>>()?;
    FeatureMatrix::from_rows(rows, pair_names(&cohort.region_labels()), cohort.subject_ids())
}
