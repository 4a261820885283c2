//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Returns the symmetric part (M + Mᵀ)/2.
///
/// Recursive covariance updates accumulate asymmetry on the order of the
/// rounding unit per step; re-symmetrizing keeps downstream eigenvalue
/// routines on their symmetric fast path.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64, min_eig: f64) -> Result<DMatrix<f64>> {
    let eigen = m.clone().symmetric_eigen();
    if let Some(bad) = eigen.eigenvalues.iter().find(|&&l| l < min_eig) {
        return Err(Error::Singular(format!(
            "eigenvalue {bad} below required minimum {min_eig}"
        )));
    }
    let mapped = DVector::from_iterator(
        eigen.eigenvalues.len(),
        eigen.eigenvalues.iter().map(|&l| f(l)),
    );
    let q = &eigen.eigenvectors;
    let result = q * DMatrix::from_diagonal(&mapped) * q.transpose();
    Ok(symmetrize(&result))
}

/// Symmetric positive-definite square root M^{1/2} via the spectral
/// decomposition. Fails if any eigenvalue is below `min_eig`.
pub fn symmetric_sqrt(m: &DMatrix<f64>, min_eig: f64) -> Result<DMatrix<f64>> {
    spectral_map(m, f64::sqrt, min_eig)
}

/// Symmetric inverse square root M^{-1/2} via the spectral decomposition.
/// Fails if any eigenvalue is below `min_eig`.
pub fn symmetric_inverse_sqrt(m: &DMatrix<f64>, min_eig: f64) -> Result<DMatrix<f64>> {
    spectral_map(m, |l| 1.0 / l.sqrt(), min_eig)
}

/// Spectral radius, the largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Solves the discrete Lyapunov equation Π = AΠAᵀ + Q.
///
/// Vectorizing both sides gives (I − A⊗A) vec(Π) = vec(Q), a d²×d² linear
/// system solved by LU. A unique solution requires the spectral radius of
/// A to be below one.
pub fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if a.ncols() != d || q.nrows() != d || q.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if a.ncols() != d { a.ncols() } else { q.nrows() },
        });
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "discrete Lyapunov equation needs spectral radius < 1, got {rho}"
        )));
    }
    let lhs = DMatrix::identity(d * d, d * d) - a.kronecker(a);
    let rhs = DVector::from_column_slice(q.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I - A \u{2297} A is singular".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(d, d, sol.as_slice())))
}
