use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

use super::metrics::pearson_r;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub gamma: f64,
    pub ridge: f64,
}

impl KernelConfig {
    pub fn new(gamma: f64, ridge: f64) -> Result<Self> {
        let config = KernelConfig { gamma, ridge };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(Error::Invalid(format!("ridge must be positive, got {}", self.ridge)));
        }
        Ok(())
    }
}

/// RBF Gram matrix `exp(-gamma * ||p_i - q_j||^2)`.
pub fn rbf_kernel(p: ArrayView2<f64>, q: ArrayView2<f64>, gamma: f64) -> Result<Array2<f64>> {
    if p.ncols() != q.ncols() {
        return Err(Error::Shape(format!(
            "kernel between {}-dim and {}-dim features",
            p.ncols(),
            q.ncols()
        )));
    }
    let mut k = Array2::zeros((p.nrows(), q.nrows()));
    for (i, pi) in p.outer_iter().enumerate() {
        for (j, qj) in q.outer_iter().enumerate() {
            let d2: f64 = pi.iter().zip(qj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            k[[i, j]] = (-gamma * d2).exp();
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrrModel {
    pub config: KernelConfig,
    pub training_features: Array2<f64>,
    /// N x S dual coefficients.
    pub dual_weights: Array2<f64>,
    /// Per-score training mean, added back after prediction.
    pub bias: Array1<f64>,
}

pub fn krr_fit(
    features: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    config: KernelConfig,
) -> Result<KrrModel> {
    config.validate()?;
    if features.nrows() != targets.nrows() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} target rows",
            features.nrows(),
            targets.nrows()
        )));
    }
    if features.nrows() == 0 {
        return Err(Error::Shape("no training subjects".into()));
    }
    if features.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite KRR input".into()));
    }
    let bias = linalg::column_means(targets);
    let centered = &targets - &bias;
    let mut k = rbf_kernel(features, features, config.gamma)?;
    for i in 0..k.nrows() {
        k[[i, i]] += config.ridge;
    }
    let dual_weights = linalg::solve_spd(k.view(), centered.view())?;
    Ok(KrrModel {
        config,
        training_features: features.to_owned(),
        dual_weights,
        bias,
    })
}

impl KrrModel {
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        let k = rbf_kernel(features, self.training_features.view(), self.config.gamma)?;
        Ok(k.dot(&self.dual_weights) + &self.bias)
    }
}

/// Leave-one-out predictions: each row is predicted by a model fit on the
/// other rows.
pub fn krr_loocv(
    features: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    config: KernelConfig,
) -> Result<Array2<f64>> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::Shape("leave-one-out needs at least 2 subjects".into()));
    }
    let rows: Vec<Array1<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let model = krr_fit(
                features.select(Axis(0), &keep).view(),
                targets.select(Axis(0), &keep).view(),
                config,
            )?;
            Ok(model.predict(features.slice(s![i..i + 1, ..]))?.row(0).to_owned())
        })
        .collect::<Result<_>>()?;
    let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
    Ok(ndarray::stack(Axis(0), &views).expect("equal-length rows"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub gammas: Vec<f64>,
    pub ridges: Vec<f64>,
}

impl Default for GridSearch {
    fn default() -> Self {
        GridSearch {
            gammas: (-4..=1).map(|e| 10f64.powi(e)).collect(),
            ridges: (-3..=3).map(|e| 10f64.powi(e)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: KernelConfig,
    /// Mean validation correlation across scores for the chosen setting.
    pub validation_r: f64,
    /// Every evaluated `(gamma, ridge, mean r)`; undefined correlations count
    /// as `-1`.
    pub table: Vec<(f64, f64, f64)>,
}

/// Select `(gamma, ridge)` by mean validation Pearson r on a seeded 50/50
/// split of the given subjects.
pub fn grid_search(
    features: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    grid: &GridSearch,
    seed: u64,
) -> Result<GridSearchResult> {
    let n = features.nrows();
    if n < 6 {
        return Err(Error::Shape(format!("grid search needs at least 6 subjects, got {n}")));
    }
    if grid.gammas.is_empty() || grid.ridges.is_empty() {
        return Err(Error::Invalid("empty hyperparameter grid".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(rng::tagged(seed, rng::tags::SPLIT, 0)));
    let (train, val) = order.split_at(n / 2);
    let xf = features.select(Axis(0), train);
    let yf = targets.select(Axis(0), train);
    let xv = features.select(Axis(0), val);
    let yv = targets.select(Axis(0), val);

    let settings: Vec<(f64, f64)> = grid
        .gammas
        .iter()
        .flat_map(|&g| grid.ridges.iter().map(move |&r| (g, r)))
        .collect();
    let table: Vec<(f64, f64, f64)> = settings
        .par_iter()
        .map(|&(gamma, ridge)| {
            let config = KernelConfig::new(gamma, ridge)?;
            let score = match krr_fit(xf.view(), yf.view(), config) {
                Ok(model) => {
                    let pred = model.predict(xv.view())?;
                    let rs: Vec<f64> = (0..yv.ncols())
                        .map(|c| pearson_r(yv.column(c), pred.column(c)).unwrap_or(-1.0))
                        .collect();
                    rs.iter().sum::<f64>() / rs.len() as f64
                }
                Err(Error::Numeric(_)) => -1.0,
                Err(e) => return Err(e),
            };
            Ok((gamma, ridge, score))
        })
        .collect::<Result<_>>()?;
    // First maximum in grid order wins ties.
    let mut best = table[0];
    for &row in &table[1..] {
        if row.2 > best.2 {
            best = row;
        }
    }
    Ok(GridSearchResult {
        best: KernelConfig::new(best.0, best.1)?,
        validation_r: best.2,
        table,
    })
}
