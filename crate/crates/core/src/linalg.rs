//! Small dense linear-algebra helpers bridging `ndarray` storage and
//! `nalgebra` decompositions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

pub fn to_na(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Sample mean of each column.
pub fn column_means(x: ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()))
}

/// Sample (n-1) covariance of the columns of `x`.
pub fn sample_covariance(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let centered = &x - &column_means(x).insert_axis(Axis(0));
    centered.t().dot(&centered) / (n as f64 - 1.0)
}

pub fn mean(x: ArrayView1<f64>) -> f64 {
    x.sum() / x.len() as f64
}

/// Sample (n-1) variance.
pub fn variance(x: ArrayView1<f64>) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; eigenvectors are the columns of the returned matrix.
pub fn sym_eigen_desc(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let eig = SymmetricEigen::new(to_na(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `A^{-1/2}` for a symmetric positive definite matrix.
pub fn inv_sqrt_spd(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (values, vectors) = sym_eigen_desc(a);
    let floor = values[0].abs().max(f64::MIN_POSITIVE) * 1e-13;
    if values.iter().any(|&v| v <= floor) {
        return Err(Error::Numeric(
            "matrix is not positive definite; cannot take inverse square root".into(),
        ));
    }
    let scaled = &vectors * &values.mapv(|v| 1.0 / v.sqrt()).insert_axis(Axis(0));
    Ok(scaled.dot(&vectors.t()))
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky, falling
/// back to a pivoted LU factorization when Cholesky fails.
pub fn solve_spd(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let a_na = to_na(a);
    let b_na = to_na(b);
    let solution = match a_na.clone().cholesky() {
        Some(chol) => chol.solve(&b_na),
        None => a_na
            .lu()
            .solve(&b_na)
            .ok_or_else(|| Error::Numeric("linear system is singular".into()))?,
    };
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("linear solve produced non-finite values".into()));
    }
    Ok(from_na(&solution))
}

pub fn smallest_eigenvalue(a: ArrayView2<f64>) -> f64 {
    let eig = SymmetricEigen::new(to_na(a));
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn dvector(x: ArrayView1<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().copied())
}
