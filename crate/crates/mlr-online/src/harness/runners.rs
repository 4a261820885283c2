//! Streaming estimator runs over simulated data with optional input
//! whitening and periodic trace callbacks.
//!
//! With whitening enabled the estimator sees rescaled regressors, and
//! every reported estimate is mapped back to the original coordinates
//! through the same transform, so traces and errors always refer to the
//! data coordinates.

use nalgebra::{DMatrix, DVector};

use crate::asym_em::{align_pair, AlignedErrors, AsymEm, ResidualTiming};
use crate::datagen::{MlrStream, ModelSpec, RegressorProcess, Sample};
use crate::error::{Error, Result};
use crate::sym_em::{aligned_distance, SymEm};
use crate::whitening::WhitenState;

/// Coordinates of one streaming run.
#[derive(Debug, Clone, Copy)]
pub struct RunSettings {
    pub seed: u64,
    pub replication: u64,
    pub horizon: u64,
    pub whiten: bool,
    /// Trace callback cadence in steps, with the final step always
    /// included; 0 disables the callback entirely.
    pub trace_every: u64,
}

/// Final state of a sign-symmetric run, in data coordinates.
#[derive(Debug, Clone)]
pub struct SymRunOutcome {
    pub estimate: DVector<f64>,
    /// Distance to the closer of the two signed true parameters.
    pub error: f64,
    /// The same distance relative to the true parameter norm.
    pub relative_error: f64,
    pub steps: u64,
}

/// Final state of a two-branch run, in data coordinates.
#[derive(Debug, Clone)]
pub struct AsymRunOutcome {
    pub beta1: DVector<f64>,
    pub beta2: DVector<f64>,
    pub errors: AlignedErrors,
    pub max_relative_error: f64,
    pub steps: u64,
}

fn traced(settings: &RunSettings, k: u64) -> bool {
    settings.trace_every != 0 && (k.is_multiple_of(settings.trace_every) || k == settings.horizon)
}

fn mapped(whitener: &Option<WhitenState>, v: &DVector<f64>) -> DVector<f64> {
    match whitener {
        Some(w) => w.whiten(v),
        None => v.clone(),
    }
}

/// Runs the sign-symmetric estimator over a freshly simulated stream.
/// The model must be symmetric so the aligned error against its
/// parameter is meaningful. The callback receives (step, estimate,
/// aligned error).
pub fn run_sym(
    model: &ModelSpec,
    process: &RegressorProcess,
    beta0: &DVector<f64>,
    sigma2: f64,
    settings: &RunSettings,
    mut on_step: impl FnMut(u64, &DVector<f64>, f64),
) -> Result<SymRunOutcome> {
    if !model.is_symmetric() {
        return Err(Error::InvalidConfig(
            "the sign-symmetric runner needs a model with mirrored branches".into(),
        ));
    }
    let d = model.dim();
    let mut em = SymEm::new(beta0.clone(), DMatrix::identity(d, d), sigma2)?;
    let mut whitener = match settings.whiten {
        true => Some(WhitenState::new(d)?),
        false => None,
    };
    let beta_star = model.beta1();
    let star_norm = beta_star.norm();
    let stream = MlrStream::new(model.clone(), process, settings.seed, settings.replication)?;
    for obs in stream.take(settings.horizon as usize) {
        match whitener.as_mut() {
            Some(w) => {
                w.update_covariance(&obs.phi)?;
                let phi = w.whiten(&obs.phi);
                em.step(&phi, obs.y)?;
            }
            None => {
                em.step(&obs.phi, obs.y)?;
            }
        }
        if traced(settings, obs.k) {
            let estimate = mapped(&whitener, em.estimate());
            let error = aligned_distance(&estimate, beta_star);
            on_step(obs.k, &estimate, error);
        }
    }
    let estimate = mapped(&whitener, em.estimate());
    let error = aligned_distance(&estimate, beta_star);
    let relative_error = if star_norm > 0.0 {
        error / star_norm
    } else {
        error
    };
    Ok(SymRunOutcome {
        estimate,
        error,
        relative_error,
        steps: settings.horizon,
    })
}

/// Runs the two-branch estimator over a freshly simulated stream. The
/// callback receives (step, branch estimates, aligned errors), all in
/// data coordinates.
#[allow(clippy::too_many_arguments)]
pub fn run_asym(
    model: &ModelSpec,
    process: &RegressorProcess,
    theta1_0: &DVector<f64>,
    theta2_0: &DVector<f64>,
    sigma2: f64,
    timing: ResidualTiming,
    settings: &RunSettings,
    mut on_step: impl FnMut(u64, &DVector<f64>, &DVector<f64>, &AlignedErrors),
) -> Result<AsymRunOutcome> {
    let d = model.dim();
    let mut em = AsymEm::new(
        theta1_0.clone(),
        theta2_0.clone(),
        DMatrix::identity(d, d),
        sigma2,
    )?;
    let mut whitener = match settings.whiten {
        true => Some(WhitenState::new(d)?),
        false => None,
    };
    let stream = MlrStream::new(model.clone(), process, settings.seed, settings.replication)?;
    for obs in stream.take(settings.horizon as usize) {
        match whitener.as_mut() {
            Some(w) => {
                w.update_covariance(&obs.phi)?;
                let phi = w.whiten(&obs.phi);
                em.step_with_timing(&phi, obs.y, timing)?;
            }
            None => {
                em.step_with_timing(&obs.phi, obs.y, timing)?;
            }
        }
        if traced(settings, obs.k) {
            let beta1 = mapped(&whitener, &em.beta1());
            let beta2 = mapped(&whitener, &em.beta2());
            let errors = align_pair(&beta1, &beta2, model.beta1(), model.beta2());
            on_step(obs.k, &beta1, &beta2, &errors);
        }
    }
    let beta1 = mapped(&whitener, &em.beta1());
    let beta2 = mapped(&whitener, &em.beta2());
    let errors = align_pair(&beta1, &beta2, model.beta1(), model.beta2());
    let max_relative_error = errors.max_relative(model);
    Ok(AsymRunOutcome {
        beta1,
        beta2,
        errors,
        max_relative_error,
        steps: settings.horizon,
    })
}

/// Materializes the first `n` observations of a stream as unlabelled
/// samples for the batch baseline.
pub fn collect_samples(
    model: &ModelSpec,
    process: &RegressorProcess,
    seed: u64,
    replication: u64,
    n: usize,
) -> Result<Vec<Sample>> {
    Ok(MlrStream::new(model.clone(), process, seed, replication)?
        .take(n)
        .map(|obs| Sample {
            phi: obs.phi,
            y: obs.y,
        })
        .collect())
}
