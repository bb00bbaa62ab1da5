use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

/// Permutations per independently seeded block; fixed so the p-value does
/// not depend on the number of worker threads.
const PERMUTATION_BLOCK: usize = 256;

fn standardized(x: ArrayView1<f64>, what: &str) -> Result<Vec<f64>> {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if !(norm > 1e-12 * scale * n.sqrt()) {
        return Err(Error::DegenerateCorrelation(format!("{what} is constant")));
    }
    Ok(centered.into_iter().map(|v| v / norm).collect())
}

/// Sample Pearson correlation.
pub fn pearson_r(truth: ArrayView1<f64>, pred: ArrayView1<f64>) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "correlation of {} vs {} values",
            truth.len(),
            pred.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::DegenerateCorrelation("need at least 2 values".into()));
    }
    let a = standardized(truth, "truth")?;
    let b = standardized(pred, "prediction")?;
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0))
}

/// Pearson `r` with a two-sided permutation p-value,
/// `(1 + #{|r_perm| >= |r|}) / (1 + n_perm)`.
pub fn pearson_r_p(
    truth: ArrayView1<f64>,
    pred: ArrayView1<f64>,
    n_perm: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if truth.len() < 3 {
        return Err(Error::DegenerateCorrelation(format!(
            "permutation test needs at least 3 subjects, got {}",
            truth.len()
        )));
    }
    let r = pearson_r(truth, pred)?;
    let a = standardized(truth, "truth")?;
    let b = standardized(pred, "prediction")?;
    let threshold = r.abs() - 1e-12;
    let n_blocks = n_perm.div_ceil(PERMUTATION_BLOCK);
    let exceed: usize = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = rng::seeded(rng::tagged(seed, rng::tags::PERMUTATION, block as u64));
            let mut shuffled = b.clone();
            let count = PERMUTATION_BLOCK.min(n_perm - block * PERMUTATION_BLOCK);
            (0..count)
                .filter(|_| {
                    shuffled.shuffle(&mut rng);
                    let rp: f64 = a.iter().zip(&shuffled).map(|(x, y)| x * y).sum();
                    rp.abs() >= threshold
                })
                .count()
        })
        .sum();
    Ok((r, (exceed as f64 + 1.0) / (n_perm as f64 + 1.0)))
}

pub fn rmse(truth: ArrayView1<f64>, pred: ArrayView1<f64>) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Shape(format!(
            "RMSE of {} vs {} values",
            truth.len(),
            pred.len()
        )));
    }
    let ss: f64 = truth.iter().zip(pred.iter()).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok((ss / truth.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive; `None` for the (0, 0)
    /// corner.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve over distinct score thresholds (ties grouped) and the
/// Mann-Whitney AUC, `P(pos > neg) + P(pos == neg) / 2`.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("ROC scores must be finite".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    // Twice the Mann-Whitney U statistic, kept integral so the AUC is exact.
    let mut u2: u64 = 0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let value = scores[order[i]];
        let (mut group_pos, mut group_neg) = (0usize, 0usize);
        while i < order.len() && scores[order[i]] == value {
            if labels[order[i]] {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            i += 1;
        }
        // Negatives strictly below this group: negatives - fp - group_neg.
        let below = (negatives - fp - group_neg) as u64;
        u2 += group_pos as u64 * (2 * below + group_neg as u64);
        tp += group_pos;
        fp += group_neg;
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold: Some(value),
        });
    }
    let auc = u2 as f64 / (2 * positives * negatives) as f64;
    Ok(RocCurve { points, auc })
}
