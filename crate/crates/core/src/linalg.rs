//! Small bridges between `ndarray` storage and `nalgebra` decompositions.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

pub(crate) fn to_na(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Largest eigenvalue magnitude of a square real matrix.
///
/// Degenerate inputs (zero or nilpotent matrices) can defeat the Schur
/// iteration, so this uses a bounded iteration count and falls back to the
/// Gelfand limit ||A^(2^m)||^(1/2^m) computed by repeated squaring, which
/// converges for every matrix.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    if d == 0 {
        return 0.0;
    }
    let max_entry = m.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if max_entry == 0.0 {
        return 0.0;
    }
    if d == 1 {
        return m[(0, 0)].abs();
    }
    if let Some(schur) = Schur::try_new(m.clone_owned(), 1e-13, 200 * d) {
        return schur
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max);
    }
    gelfand_radius(m)
}

/// Spectral radius via normalized repeated squaring: after m squarings the
/// Frobenius norm estimate ||A^(2^m)||^(1/2^m) is within a factor
/// (poly(2^m))^(1/2^m) of the radius, which is negligible for m = 48.
fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut b = m.clone_owned();
    let mut log_norm_acc = 0.0f64;
    let mut k = 1.0f64;
    for _ in 0..48 {
        let norm = b.norm();
        if norm == 0.0 || !norm.is_finite() {
            return if norm == 0.0 { 0.0 } else { f64::INFINITY };
        }
        b /= norm;
        log_norm_acc += norm.ln() / k;
        b = &b * &b;
        k *= 2.0;
    }
    let final_norm = b.norm();
    if final_norm > 0.0 {
        log_norm_acc += final_norm.ln() / k;
    }
    log_norm_acc.exp()
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub(crate) fn cholesky_lower(cov: &Array2<f64>) -> Result<DMatrix<f64>> {
    let na = to_na(cov);
    na.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("covariance matrix is not positive definite".into()))
}

/// Checks symmetry within `tol` (absolute) and strictly positive eigenvalues.
pub(crate) fn check_spd(cov: &Array2<f64>, tol: f64) -> Result<()> {
    if cov.nrows() != cov.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    for i in 0..cov.nrows() {
        for j in 0..i {
            if (cov[[i, j]] - cov[[j, i]]).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "covariance not symmetric at ({i},{j}): {} vs {}",
                    cov[[i, j]],
                    cov[[j, i]]
                )));
            }
        }
    }
    // positive definiteness: Cholesky succeeds iff all eigenvalues > 0
    if to_na(cov).cholesky().is_none() {
        return Err(Error::InvalidInput(
            "covariance is not positive definite".into(),
        ));
    }
    Ok(())
}
