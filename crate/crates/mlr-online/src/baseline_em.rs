//! Batch EM baseline on a fixed sample set.
//!
//! Alternates posterior weighting of every sample between the two
//! branches with weighted least squares refits. Serves as the reference
//! the streaming estimators are compared against: it needs all data up
//! front, costs O(n·d²) per iteration, and far-off initializations make
//! its per-sample likelihoods underflow to zero, which the textbook
//! update turns into 0/0. The fit treats that event as a failed run by
//! default rather than propagating NaN.

use nalgebra::{DMatrix, DVector};

use crate::asym_em::align_pair;
use crate::datagen::{ModelSpec, Sample};
use crate::error::{Error, Result};
use crate::linalg::min_symmetric_eigenvalue;

/// Fit policy knobs.
#[derive(Debug, Clone)]
pub struct PopEmOptions {
    pub iterations: usize,
    /// Stop and mark the run failed as soon as some sample is assigned
    /// zero likelihood by both branches (the exact condition under which
    /// unnormalized posterior weights become 0/0 in double precision).
    /// Off means the stable weight formula silently carries on.
    pub abort_on_vanishing_likelihood: bool,
}

impl Default for PopEmOptions {
    fn default() -> Self {
        Self {
            iterations: 20,
            abort_on_vanishing_likelihood: true,
        }
    }
}

/// Why a fit stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    /// The weighted Gram matrix lost rank for one branch.
    SingularGram { iteration: usize, component: usize },
    /// Some sample had exactly zero likelihood under both branches.
    VanishingLikelihood { iteration: usize },
}

/// Result of a batch EM run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub beta1: DVector<f64>,
    pub beta2: DVector<f64>,
    pub iterations_run: usize,
    pub abort: Option<AbortReason>,
}

impl FitOutcome {
    /// Larger of the two nearest-truth residual norms, relative to the
    /// larger truth norm.
    pub fn aligned_relative_error(&self, model: &ModelSpec) -> f64 {
        align_pair(&self.beta1, &self.beta2, model.beta1(), model.beta2()).max_relative(model)
    }

    /// A run converged if it was not aborted and both branch estimates
    /// landed within the relative tolerance of the truth pair.
    pub fn converged(&self, model: &ModelSpec, rel_tol: f64) -> bool {
        self.abort.is_none() && self.aligned_relative_error(model) < rel_tol
    }
}

fn validate_inputs(data: &[Sample], dim: usize, sigma2: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("batch EM needs at least one sample".into()));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "batch EM needs a positive noise variance, got {sigma2}"
        )));
    }
    if let Some(bad) = data.iter().find(|s| s.phi.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.phi.len(),
        });
    }
    Ok(())
}

/// Both branch weights of one sample, computed with max-subtraction so
/// the pair is exact under exchanging the branches.
fn weight_pair(beta1: &DVector<f64>, beta2: &DVector<f64>, s: &Sample, sigma2: f64) -> (f64, f64) {
    let r1 = s.y - beta1.dot(&s.phi);
    let r2 = s.y - beta2.dot(&s.phi);
    let a1 = -r1 * r1 / (2.0 * sigma2);
    let a2 = -r2 * r2 / (2.0 * sigma2);
    let m = a1.max(a2);
    let e1 = (a1 - m).exp();
    let e2 = (a2 - m).exp();
    let denom = e1 + e2;
    (e1 / denom, e2 / denom)
}

/// Posterior weight of the first branch for every sample.
pub fn e_step(
    beta1: &DVector<f64>,
    beta2: &DVector<f64>,
    data: &[Sample],
    sigma2: f64,
) -> Result<Vec<f64>> {
    validate_inputs(data, beta1.len(), sigma2)?;
    Ok(data
        .iter()
        .map(|s| weight_pair(beta1, beta2, s, sigma2).0)
        .collect())
}

/// Weighted least squares refit of one branch. Fails when the weighted
/// Gram matrix is effectively singular (smallest eigenvalue at or below
/// 10⁻¹⁰ of its trace).
pub fn m_step(data: &[Sample], weights: &[f64], dim: usize) -> Result<DVector<f64>> {
    if data.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: weights.len(),
        });
    }
    let n = data.len() as f64;
    let mut gram = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (s, w) in data.iter().zip(weights) {
        gram.ger(w / n, &s.phi, &s.phi, 1.0);
        rhs.axpy(w * s.y / n, &s.phi, 1.0);
    }
    let min_eig = min_symmetric_eigenvalue(&gram);
    if min_eig <= 1e-10 * gram.trace() {
        return Err(Error::Singular(format!(
            "weighted Gram matrix is rank deficient (min eigenvalue {min_eig})"
        )));
    }
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Singular("weighted Gram matrix is not positive definite".into()))
}

/// Runs batch EM from the given branch initialization.
///
/// Configuration errors surface as `Err`; numerical failures of a
/// particular run (rank-deficient refit, vanished likelihoods) are
/// recorded in the outcome's `abort` field with the parameters as of the
/// failing iteration.
pub fn fit(
    data: &[Sample],
    init1: DVector<f64>,
    init2: DVector<f64>,
    sigma2: f64,
    options: &PopEmOptions,
) -> Result<FitOutcome> {
    if init1.len() != init2.len() {
        return Err(Error::DimensionMismatch {
            expected: init1.len(),
            got: init2.len(),
        });
    }
    if options.iterations == 0 {
        return Err(Error::InvalidConfig("batch EM needs at least one iteration".into()));
    }
    validate_inputs(data, init1.len(), sigma2)?;
    let dim = init1.len();
    let mut beta1 = init1;
    let mut beta2 = init2;
    for t in 0..options.iterations {
        if options.abort_on_vanishing_likelihood {
            let vanished = data.iter().any(|s| {
                let r1 = s.y - beta1.dot(&s.phi);
                let r2 = s.y - beta2.dot(&s.phi);
                let best = (r1 * r1).min(r2 * r2);
                (-best / (2.0 * sigma2)).exp() == 0.0
            });
            if vanished {
                return Ok(FitOutcome {
                    beta1,
                    beta2,
                    iterations_run: t,
                    abort: Some(AbortReason::VanishingLikelihood { iteration: t }),
                });
            }
        }
        let mut w1 = Vec::with_capacity(data.len());
        let mut w2 = Vec::with_capacity(data.len());
        for s in data {
            let (a, b) = weight_pair(&beta1, &beta2, s, sigma2);
            w1.push(a);
            w2.push(b);
        }
        let next1 = match m_step(data, &w1, dim) {
            Ok(b) => b,
            Err(_) => {
                return Ok(FitOutcome {
                    beta1,
                    beta2,
                    iterations_run: t,
                    abort: Some(AbortReason::SingularGram {
                        iteration: t,
                        component: 1,
                    }),
                })
            }
        };
        let next2 = match m_step(data, &w2, dim) {
            Ok(b) => b,
            Err(_) => {
                return Ok(FitOutcome {
                    beta1,
                    beta2,
                    iterations_run: t,
                    abort: Some(AbortReason::SingularGram {
                        iteration: t,
                        component: 2,
                    }),
                })
            }
        };
        beta1 = next1;
        beta2 = next2;
    }
    Ok(FitOutcome {
        beta1,
        beta2,
        iterations_run: options.iterations,
        abort: None,
    })
}
