use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` for symmetric positive-definite `a` through its
/// Cholesky factor. `None` if the factorization fails.
pub(crate) fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.cholesky()?;
    Some(chol.solve(b))
}

/// Square-root factor `L` with `L Lᵀ = cov` for a symmetric PSD matrix.
/// Tiny negative eigenvalues (down to `-tol`) are clamped to zero so
/// singular covariances are accepted.
pub(crate) fn psd_factor(cov: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return None;
    }
    for i in 0..n {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > tol {
                return None;
            }
        }
    }
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let eig = cov.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -tol || !l.is_finite()) {
        return None;
    }
    let mut factor = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let scale = l.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(scale);
    }
    Some(factor)
}
