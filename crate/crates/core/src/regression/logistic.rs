use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::real::sigmoid;

/// Logistic regression with intercept, fit by Newton's method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    /// `l2` is a small ridge on the weights that keeps separable data finite.
    pub fn fit(x: ArrayView2<f64>, labels: &[bool], l2: f64) -> Result<Self> {
        let (n, d) = x.dim();
        if n != labels.len() {
            return Err(Error::Shape(format!("{n} rows for {} labels", labels.len())));
        }
        let positives = labels.iter().filter(|&&l| l).count();
        if positives == 0 || positives == n {
            return Err(Error::SingleClass {
                positives,
                negatives: n - positives,
            });
        }
        // Augmented design [1, x] with the intercept unpenalized.
        let mut beta = Array1::<f64>::zeros(d + 1);
        for _ in 0..100 {
            let mut grad = Array1::<f64>::zeros(d + 1);
            let mut hess = Array2::<f64>::zeros((d + 1, d + 1));
            for (row, &label) in x.outer_iter().zip(labels) {
                let z: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
                let logit: f64 = z.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
                let p = sigmoid(logit);
                let w = (p * (1.0 - p)).max(1e-12);
                let y = if label { 1.0 } else { 0.0 };
                for i in 0..=d {
                    grad[i] += (p - y) * z[i];
                    for j in 0..=d {
                        hess[[i, j]] += w * z[i] * z[j];
                    }
                }
            }
            for i in 1..=d {
                grad[i] += l2 * beta[i];
                hess[[i, i]] += l2;
            }
            let step = linalg::solve_spd(hess.view(), grad.view().insert_axis(ndarray::Axis(1)))?;
            let step = step.column(0);
            beta -= &step;
            if step.iter().all(|s| s.abs() < 1e-10) {
                break;
            }
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("logistic fit diverged".into()));
        }
        Ok(LogisticModel {
            intercept: beta[0],
            weights: beta.slice(ndarray::s![1..]).to_owned(),
        })
    }

    pub fn logit(&self, row: ArrayView1<f64>) -> f64 {
        self.intercept + row.dot(&self.weights)
    }

    pub fn predict_logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }
}
