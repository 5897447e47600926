//! Dense and Toeplitz linear algebra used by the Gaussian computations.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{LabError, Result};

/// Diagonal jitter ladder tried, relative to the kernel variance, before a
/// covariance matrix is declared not positive semidefinite.
pub const JITTER_LADDER: [f64; 3] = [1e-14, 1e-12, 1e-10];

/// Dense symmetric Toeplitz matrix with first column `col`.
pub fn symmetric_toeplitz(col: &[f64]) -> DMatrix<f64> {
    let n = col.len();
    DMatrix::from_fn(n, n, |i, j| col[i.abs_diff(j)])
}

/// `log det(a)` of a symmetric positive definite matrix via Cholesky.
pub fn cholesky_logdet(a: DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let chol = a.cholesky().ok_or_else(|| {
        LabError::NotPositiveSemidefinite(format!("Cholesky factorization failed for {n}x{n} matrix"))
    })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `log det` of the symmetric positive definite Toeplitz matrix with first
/// column `col`, by the Durbin form of the Levinson recursion.
///
/// The determinant is the product of the successive one-step prediction error
/// variances; a non-positive prediction error means the matrix is not
/// positive definite.
pub fn levinson_logdet(col: &[f64]) -> Result<f64> {
    let n = col.len();
    if n == 0 {
        return Ok(0.0);
    }
    let r0 = col[0];
    if r0 <= 0.0 || !r0.is_finite() {
        return Err(LabError::NotPositiveSemidefinite(format!("leading entry {r0}")));
    }
    let mut logdet = r0.ln();
    let mut err = r0;
    let mut coeffs: Vec<f64> = Vec::with_capacity(n);
    let mut scratch: Vec<f64> = Vec::with_capacity(n);
    for k in 1..n {
        let mut acc = col[k];
        for (j, a) in coeffs.iter().enumerate() {
            acc -= a * col[k - 1 - j];
        }
        let reflection = acc / err;
        scratch.clear();
        scratch.extend(
            coeffs
                .iter()
                .enumerate()
                .map(|(j, a)| a - reflection * coeffs[coeffs.len() - 1 - j]),
        );
        scratch.push(reflection);
        std::mem::swap(&mut coeffs, &mut scratch);
        err *= 1.0 - reflection * reflection;
        if err <= 0.0 || !err.is_finite() {
            return Err(LabError::NotPositiveSemidefinite(format!(
                "prediction error {err:e} at order {k}"
            )));
        }
        logdet += err.ln();
    }
    Ok(logdet)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Symmetric square root `S` with `S Sᵀ = K + jitter·scale·I`, walking
/// [`JITTER_LADDER`] until the jittered spectrum is nonnegative.
pub fn psd_sqrt_with_jitter(k: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(k.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    for jitter in JITTER_LADDER {
        let shift = jitter * scale;
        if min + shift >= 0.0 {
            let roots = eig.eigenvalues.map(|l| (l + shift).max(0.0).sqrt());
            let q = &eig.eigenvectors;
            let scaled = q * DMatrix::from_diagonal(&roots);
            return Ok(scaled * q.transpose());
        }
    }
    Err(LabError::KernelNotPsd { min_eigenvalue: min })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levinson_matches_cholesky() {
        let col: Vec<f64> = (0..40).map(|k| 2.0 * (-0.3 * k as f64).exp() + if k == 0 { 1.0 } else { 0.0 }).collect();
        let dense = cholesky_logdet(symmetric_toeplitz(&col)).unwrap();
        let fast = levinson_logdet(&col).unwrap();
        assert!((dense - fast).abs() < 1e-11 * dense.abs().max(1.0), "{dense} vs {fast}");
    }

    #[test]
    fn indefinite_toeplitz_is_rejected() {
        assert!(levinson_logdet(&[1.0, 2.0]).is_err());
        assert!(cholesky_logdet(symmetric_toeplitz(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn square_root_reproduces_matrix() {
        let col = [1.0, 0.5, 0.1];
        let k = symmetric_toeplitz(&col);
        let s = psd_sqrt_with_jitter(&k, 1.0).unwrap();
        let back = &s * s.transpose();
        assert!((back - k).abs().max() < 1e-9);
    }

    #[test]
    fn negative_kernel_fails_after_ladder() {
        let k = symmetric_toeplitz(&[1.0, 1.5]);
        assert!(matches!(psd_sqrt_with_jitter(&k, 1.0), Err(LabError::KernelNotPsd { .. })));
    }
}
