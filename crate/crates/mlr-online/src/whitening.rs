//! Online regressor whitening.
//!
//! Maintains the running second moment R̄_k of the regressor stream and,
//! once enough samples have accumulated, maps each regressor through
//! R̄_k^{−1/2} so downstream estimators see a stream with identity second
//! moment. Estimates produced in whitened coordinates map back through
//! the same matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::symmetric_inverse_sqrt;

/// Smallest second-moment eigenvalue accepted for inversion.
const MIN_EIGENVALUE: f64 = 1e-10;

/// Running whitening transform. Not ready until at least 2·dim samples
/// have been absorbed and the second moment is safely invertible; until
/// then [`WhitenState::whiten`] passes vectors through unchanged.
#[derive(Debug, Clone)]
pub struct WhitenState {
    moment: DMatrix<f64>,
    transform: Option<DMatrix<f64>>,
    count: u64,
    dim: usize,
}

impl WhitenState {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("whitening dimension must be positive".into()));
        }
        Ok(Self {
            moment: DMatrix::zeros(dim, dim),
            transform: None,
            count: 0,
            dim,
        })
    }

    /// Folds one regressor into the running second moment
    /// R̄_k = R̄_{k−1} + (1/k)(φφᵀ − R̄_{k−1}) and refreshes the cached
    /// inverse square root.
    pub fn update_covariance(&mut self, phi: &DVector<f64>) -> Result<()> {
        if phi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: phi.len(),
            });
        }
        self.count += 1;
        let gain = 1.0 / self.count as f64;
        self.moment.ger(gain, phi, phi, 1.0 - gain);
        self.transform = if self.count >= 2 * self.dim as u64 {
            symmetric_inverse_sqrt(&self.moment, MIN_EIGENVALUE).ok()
        } else {
            None
        };
        Ok(())
    }

    /// Applies R̄^{−1/2} when ready, otherwise returns the input as is.
    /// The same map takes estimates formed in whitened coordinates back
    /// to original coordinates.
    pub fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.transform {
            Some(t) => t * v,
            None => v.clone(),
        }
    }

    pub fn ready(&self) -> bool {
        self.transform.is_some()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn second_moment(&self) -> &DMatrix<f64> {
        &self.moment
    }

    /// The cached R̄^{−1/2}, if ready.
    pub fn transform(&self) -> Option<&DMatrix<f64>> {
        self.transform.as_ref()
    }
}
