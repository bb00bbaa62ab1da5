//! Symmetric FastICA with the log-cosh contrast (tanh nonlinearity).
//!
//! Data are centered and PCA-whitened to `K` dimensions; the rotation `W`
//! in whitened coordinates is kept orthonormal by symmetric decorrelation
//! `W <- (W W^T)^{-1/2} W` after every update.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::FeatureMatrix;
use crate::dataio::ParcellatedTimeseries;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct IcaConfig {
    pub n_components: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl IcaConfig {
    pub fn new(n_components: usize) -> Self {
        Self {
            n_components,
            max_iter: 500,
            tol: 1e-5,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct UnmixingResult {
    /// K x B: maps centered data to sources, `rotation . whitener`.
    pub unmixing: Array2<f64>,
    /// K x K orthonormal rotation in whitened coordinates.
    pub rotation: Array2<f64>,
    /// B x K: pseudo-inverse of `unmixing`.
    pub mixing: Array2<f64>,
    /// K x B PCA whitening matrix.
    pub whitener: Array2<f64>,
    pub mean: Array1<f64>,
    pub n_components: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl UnmixingResult {
    /// Unit-variance source timecourses of `data` (rows are samples).
    pub fn sources(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let centered = &data - &self.mean.view().insert_axis(Axis(0));
        centered.dot(&self.unmixing.t())
    }

    /// Sources scaled by the norm of their spatial map, i.e. expressed in
    /// data units.
    pub fn scaled_timecourses(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let mut s = self.sources(data);
        for (k, mut col) in s.columns_mut().into_iter().enumerate() {
            let norm = self.mixing.column(k).dot(&self.mixing.column(k)).sqrt();
            col *= norm;
        }
        s
    }
}

fn symmetric_decorrelation(w: &Array2<f64>) -> Result<Array2<f64>> {
    let gram = w.dot(&w.t());
    Ok(linalg::inv_sqrt_spd(gram.view())?.dot(w))
}

pub fn ica_fit(data: ArrayView2<f64>, config: &IcaConfig) -> Result<UnmixingResult> {
    let (m, b) = data.dim();
    let k = config.n_components;
    if k == 0 || k > b || m <= k {
        return Err(Error::Rank {
            rank: b.min(m.saturating_sub(1)),
            requested: k,
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("ICA input contains non-finite values".into()));
    }

    let mean = linalg::column_means(data);
    let centered = &data - &mean.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / (m as f64 - 1.0);
    let (eigvals, eigvecs) = linalg::sym_eigen_desc(cov.view());
    let floor = eigvals[0].max(f64::MIN_POSITIVE) * 1e-10;
    let rank = eigvals.iter().filter(|&&v| v > floor).count();
    if rank < k {
        return Err(Error::Rank { rank, requested: k });
    }
    let mut whitener = Array2::zeros((k, b));
    for c in 0..k {
        let scale = 1.0 / eigvals[c].sqrt();
        whitener.row_mut(c).assign(&eigvecs.column(c).mapv(|v| v * scale));
    }
    let z = centered.dot(&whitener.t());

    let mut rng = rng::seeded(rng::tagged(config.seed, rng::tags::ICA, 0));
    let init = Array2::from_shape_fn((k, k), |_| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init)?;

    let mut converged = false;
    let mut iterations = 0;
    let inv_m = 1.0 / m as f64;
    for _ in 0..config.max_iter {
        iterations += 1;
        let g = z.dot(&w.t()).mapv(f64::tanh);
        let g_prime_mean = g.mapv(|v| 1.0 - v * v).sum_axis(Axis(0)) * inv_m;
        let update = g.t().dot(&z) * inv_m - &(&w * &g_prime_mean.insert_axis(Axis(1)));
        let w_new = symmetric_decorrelation(&update)?;
        let lim = w_new
            .rows()
            .into_iter()
            .zip(w.rows())
            .map(|(a, old)| (1.0 - a.dot(&old).abs()).abs())
            .fold(0.0f64, f64::max);
        w = w_new;
        if lim < config.tol {
            converged = true;
            break;
        }
    }

    // Mixing for orthonormal W: eigvecs[:, :K] * sqrt(eigvals) * W^T.
    let mut dewhiten = Array2::zeros((b, k));
    for c in 0..k {
        dewhiten.column_mut(c).assign(&eigvecs.column(c).mapv(|v| v * eigvals[c].sqrt()));
    }
    let mut mixing = dewhiten.dot(&w.t());

    // Deterministic order: descending explained variance, then the
    // largest-magnitude spatial weight positive.
    let energy: Vec<f64> = (0..k).map(|c| mixing.column(c).dot(&mixing.column(c))).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| energy[c].total_cmp(&energy[a]).then(a.cmp(&c)));
    let mut rotation = Array2::zeros((k, k));
    let mut sorted_mixing = Array2::zeros((b, k));
    for (dst, &src) in order.iter().enumerate() {
        let col = mixing.column(src);
        let peak = col
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        rotation.row_mut(dst).assign(&w.row(src).mapv(|v| v * sign));
        sorted_mixing.column_mut(dst).assign(&col.mapv(|v| v * sign));
    }
    mixing = sorted_mixing;
    let unmixing = rotation.dot(&whitener);

    Ok(UnmixingResult {
        unmixing,
        rotation,
        mixing,
        whitener,
        mean,
        n_components: k,
        converged,
        iterations,
    })
}

pub(crate) fn feature_names(k: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..k).map(|c| format!("ic{c:02}_var")).collect();
    for i in 0..k {
        for j in i + 1..k {
            names.push(format!("ic{i:02}~ic{j:02}_corr"));
        }
    }
    names
}

/// Variances of the data-scaled component timecourses followed by the
/// strict upper triangle of their correlation matrix: K(K+1)/2 values.
fn timecourse_features(tc: ArrayView2<f64>) -> Array1<f64> {
    let k = tc.ncols();
    let cov = linalg::sample_covariance(tc);
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for c in 0..k {
        out.push(cov[[c, c]]);
    }
    for i in 0..k {
        for j in i + 1..k {
            let denom = (cov[[i, i]] * cov[[j, j]]).sqrt();
            out.push(if denom > 0.0 { cov[[i, j]] / denom } else { 0.0 });
        }
    }
    Array1::from(out)
}

pub fn ica_features_individual(ts: &ParcellatedTimeseries, config: &IcaConfig) -> Result<Array1<f64>> {
    let fit = ica_fit(ts.values.view(), config)?;
    Ok(timecourse_features(fit.scaled_timecourses(ts.values.view()).view()))
}

#[derive(Debug, Clone)]
pub struct GroupIcaResult {
    pub fit: UnmixingResult,
    /// Row range of each subject inside the concatenated matrix.
    pub subject_rows: Vec<std::ops::Range<usize>>,
    /// Per-subject T x K data-scaled component timecourses.
    pub timecourses: Vec<Array2<f64>>,
}

/// Temporal-concatenation group ICA: one fit on all subjects' stacked rows,
/// then each subject's rows projected through the shared unmixing.
pub fn group_ica_features(
    all: &[ParcellatedTimeseries],
    config: &IcaConfig,
) -> Result<(FeatureMatrix, GroupIcaResult)> {
    let first = all
        .first()
        .ok_or_else(|| Error::Invalid("group ICA needs at least one subject".into()))?;
    let (t, b) = first.values.dim();
    if all.iter().any(|ts| ts.values.dim() != (t, b)) {
        return Err(Error::Shape("group ICA needs uniform T and B".into()));
    }
    let views: Vec<ArrayView2<f64>> = all.iter().map(|ts| ts.values.view()).collect();
    let stacked = ndarray::concatenate(Axis(0), &views).expect("uniform shapes concatenate");
    let fit = ica_fit(stacked.view(), config)?;
    let subject_rows: Vec<_> = (0..all.len()).map(|i| i * t..(i + 1) * t).collect();
    let timecourses: Vec<Array2<f64>> = all
        .par_iter()
        .map(|ts| fit.scaled_timecourses(ts.values.view()))
        .collect();
    let rows: Vec<Array1<f64>> = timecourses.iter().map(|tc| timecourse_features(tc.view())).collect();
    let ids = all.iter().map(|ts| ts.subject_id.clone()).collect();
    let features = FeatureMatrix::from_rows(rows, feature_names(config.n_components), ids)?;
    Ok((
        features,
        GroupIcaResult {
            fit,
            subject_rows,
            timecourses,
        },
    ))
}

/// Normalized Amari index of a K x K matrix `p` (0 for a scaled
/// permutation, at most 1).
pub fn amari_index(p: ArrayView2<f64>) -> f64 {
    let k = p.nrows();
    if k < 2 {
        return 0.0;
    }
    let a = p.mapv(f64::abs);
    let mut total = 0.0;
    for row in a.rows() {
        let max = row.iter().copied().fold(0.0, f64::max);
        total += row.sum() / max - 1.0;
    }
    for col in a.columns() {
        let max = col.iter().copied().fold(0.0, f64::max);
        total += col.sum() / max - 1.0;
    }
    total / (2.0 * k as f64 * (k as f64 - 1.0))
}
