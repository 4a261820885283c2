//! Streaming estimator for the symmetric mixture y = ±βᵀφ + w.
//!
//! Each step replaces the raw response by its posterior-weighted target
//! ȳ = y·tanh(βᵀφ·y/σ²) and then performs a recursive least-squares
//! update toward ȳ. Cost is O(d²) per observation. The estimate
//! converges to β* or −β*, an ambiguity inherent to the model, so errors
//! are measured after sign alignment.

use nalgebra::{DMatrix, DVector};

use crate::datagen::Sample;
use crate::error::{Error, Result};
use crate::linalg::min_symmetric_eigenvalue;
use crate::tanh_scaled;

/// Recursive symmetric-mixture estimator.
#[derive(Debug, Clone)]
pub struct SymEm {
    beta: DVector<f64>,
    p: DMatrix<f64>,
    sigma2: f64,
}

fn validate_gain_matrix(p: &DMatrix<f64>, dim: usize) -> Result<DMatrix<f64>> {
    if p.nrows() != dim || p.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.nrows().max(p.ncols()),
        });
    }
    if (p - p.transpose()).norm() > 1e-10 * (1.0 + p.norm()) {
        return Err(Error::InvalidConfig("gain matrix must be symmetric".into()));
    }
    let sym = crate::linalg::symmetrize(p);
    let min_eig = min_symmetric_eigenvalue(&sym);
    if min_eig <= 0.0 {
        return Err(Error::Singular(format!(
            "gain matrix must be positive definite, smallest eigenvalue is {min_eig}"
        )));
    }
    Ok(sym)
}

fn validate_sigma2(sigma2: f64) -> Result<()> {
    if !sigma2.is_finite() || sigma2 < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be finite and non-negative, got {sigma2}"
        )));
    }
    Ok(())
}

impl SymEm {
    /// A zero initial estimate is a fixed point of the update and is
    /// rejected; any other starting point works.
    pub fn new(beta0: DVector<f64>, p0: DMatrix<f64>, sigma2: f64) -> Result<Self> {
        if beta0.is_empty() {
            return Err(Error::InvalidConfig("estimate dimension must be positive".into()));
        }
        if beta0.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidConfig(
                "initial estimate must be nonzero, zero is a stationary point".into(),
            ));
        }
        if beta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("initial estimate must be finite".into()));
        }
        validate_sigma2(sigma2)?;
        let p = validate_gain_matrix(&p0, beta0.len())?;
        Ok(Self {
            beta: beta0,
            p,
            sigma2,
        })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Current gain matrix P, the regularized inverse Gram matrix of the
    /// regressors seen so far.
    pub fn gain_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Posterior probability that (φ, y) came from the +β branch under
    /// the current estimate, computed as ½(1 + tanh(βᵀφ·y/σ²)) which
    /// equals the logistic function of 2βᵀφ·y/σ² without overflow.
    pub fn responsibility(&self, phi: &DVector<f64>, y: f64) -> f64 {
        0.5 * (1.0 + tanh_scaled(self.beta.dot(phi) * y, self.sigma2))
    }

    /// Posterior-weighted regression target ȳ = y·tanh(βᵀφ·y/σ²),
    /// equivalently (2·responsibility − 1)·y.
    pub fn soft_target(&self, phi: &DVector<f64>, y: f64) -> f64 {
        y * tanh_scaled(self.beta.dot(phi) * y, self.sigma2)
    }

    /// Absorbs one observation and returns the soft target it used.
    pub fn step(&mut self, phi: &DVector<f64>, y: f64) -> Result<f64> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: phi.len(),
            });
        }
        let pphi = &self.p * phi;
        let a = 1.0 / (1.0 + phi.dot(&pphi));
        let ybar = self.soft_target(phi, y);
        let innovation = ybar - self.beta.dot(phi);
        self.beta.axpy(a * innovation, &pphi, 1.0);
        self.p.ger(-a, &pphi, &pphi, 1.0);
        resymmetrize(&mut self.p);
        Ok(ybar)
    }

    /// ‖β̂ ∓ β*‖ minimized over the sign, the natural error metric given
    /// the ±β* ambiguity.
    pub fn aligned_error(&self, truth: &DVector<f64>) -> f64 {
        aligned_distance(&self.beta, truth)
    }

    /// [`SymEm::aligned_error`] divided by ‖β*‖.
    pub fn aligned_relative_error(&self, truth: &DVector<f64>) -> f64 {
        self.aligned_error(truth) / truth.norm()
    }
}

/// min(‖v − t‖, ‖v + t‖).
pub fn aligned_distance(v: &DVector<f64>, t: &DVector<f64>) -> f64 {
    (v - t).norm().min((v + t).norm())
}

fn resymmetrize(p: &mut DMatrix<f64>) {
    let d = p.nrows();
    for i in 0..d {
        for j in 0..i {
            let m = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = m;
            p[(j, i)] = m;
        }
    }
}

/// One fixed-dataset iteration of the symmetric maximum-likelihood map:
/// re-targets every sample with the current β, then solves the least
/// squares problem (Σφφᵀ)β' = Σφ·ȳ. Fails if the Gram matrix is not
/// positive definite.
pub fn batch_mle_iterate(
    samples: &[Sample],
    beta: &DVector<f64>,
    sigma2: f64,
) -> Result<DVector<f64>> {
    validate_sigma2(sigma2)?;
    let d = beta.len();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for s in samples {
        if s.phi.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.phi.len(),
            });
        }
        let ybar = s.y * tanh_scaled(beta.dot(&s.phi) * s.y, sigma2);
        gram.ger(1.0, &s.phi, &s.phi, 1.0);
        rhs.axpy(ybar, &s.phi, 1.0);
    }
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Singular("sample Gram matrix is not positive definite".into()))
}
