//! Synthetic data for two-component mixed linear regression.
//!
//! Each observation pairs a regressor φ_k with a response
//! y = β₁ᵀφ_k + w or y = β₂ᵀφ_k + w, the branch chosen by a hidden
//! label that is independent of everything else. Regressors can be iid
//! Gaussian, a stable vector AR(1) process, or uniform on a sphere.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{discrete_lyapunov, min_symmetric_eigenvalue, spectral_radius};
use crate::rng::{derive, StreamKind};

/// Hidden component label. `Plus` selects β₁, `Minus` selects β₂; in the
/// symmetric model (β₂ = −β₁) the label is exactly the sign multiplying
/// β₁ᵀφ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Plus,
    Minus,
}

impl Label {
    /// +1 for `Plus`, −1 for `Minus`.
    pub fn sign(self) -> f64 {
        match self {
            Label::Plus => 1.0,
            Label::Minus => -1.0,
        }
    }

    /// Component index in reports: 1 for `Plus`, 2 for `Minus`.
    pub fn index(self) -> usize {
        match self {
            Label::Plus => 1,
            Label::Minus => 2,
        }
    }
}

/// Draws a label that is `Plus` with probability `p_plus`.
pub fn sample_label(rng: &mut ChaCha12Rng, p_plus: f64) -> Label {
    if rng.random::<f64>() < p_plus {
        Label::Plus
    } else {
        Label::Minus
    }
}

/// Regressor process driving the stream.
#[derive(Debug, Clone)]
pub enum RegressorProcess {
    /// φ_k iid N(0, covariance).
    IidGaussian { covariance: DMatrix<f64> },
    /// φ_{k+1} = dynamics · φ_k + e_k with e_k iid N(0, noise_covariance),
    /// started from its stationary distribution.
    Ar1 {
        dynamics: DMatrix<f64>,
        noise_covariance: DMatrix<f64>,
    },
    /// φ_k iid uniform on the sphere of the given radius.
    SphereUniform { radius: f64, dim: usize },
}

impl RegressorProcess {
    pub fn dim(&self) -> usize {
        match self {
            RegressorProcess::IidGaussian { covariance } => covariance.nrows(),
            RegressorProcess::Ar1 { dynamics, .. } => dynamics.nrows(),
            RegressorProcess::SphereUniform { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegressorProcess::IidGaussian { covariance } => {
                require_spd("regressor covariance", covariance)
            }
            RegressorProcess::Ar1 {
                dynamics,
                noise_covariance,
            } => {
                if dynamics.nrows() != dynamics.ncols() {
                    return Err(Error::InvalidConfig("dynamics matrix must be square".into()));
                }
                if noise_covariance.nrows() != dynamics.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: dynamics.nrows(),
                        got: noise_covariance.nrows(),
                    });
                }
                let rho = spectral_radius(dynamics);
                if rho >= 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "AR(1) dynamics must be stable, spectral radius is {rho}"
                    )));
                }
                require_spd("innovation covariance", noise_covariance)
            }
            RegressorProcess::SphereUniform { radius, dim } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "sphere radius must be positive and finite, got {radius}"
                    )));
                }
                if *dim == 0 {
                    return Err(Error::InvalidConfig("regressor dimension must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Stationary second moment E[φφᵀ]: the covariance itself for iid
    /// Gaussian regressors, the fixed point of Π = AΠAᵀ + Q for AR(1),
    /// and (r²/d)·I on the sphere.
    pub fn stationary_second_moment(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        match self {
            RegressorProcess::IidGaussian { covariance } => Ok(covariance.clone()),
            RegressorProcess::Ar1 {
                dynamics,
                noise_covariance,
            } => discrete_lyapunov(dynamics, noise_covariance),
            RegressorProcess::SphereUniform { radius, dim } => {
                Ok(DMatrix::identity(*dim, *dim) * (radius * radius / *dim as f64))
            }
        }
    }
}

fn require_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidConfig(format!("{name} must be square")));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidConfig(format!("{name} must be non-empty")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} has non-finite entries")));
    }
    if (m - m.transpose()).norm() > 1e-10 * (1.0 + m.norm()) {
        return Err(Error::InvalidConfig(format!("{name} must be symmetric")));
    }
    let min_eig = min_symmetric_eigenvalue(m);
    if min_eig <= 0.0 {
        return Err(Error::Singular(format!(
            "{name} must be positive definite, smallest eigenvalue is {min_eig}"
        )));
    }
    Ok(())
}

/// Ground-truth mixture parameters.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    beta1: DVector<f64>,
    beta2: DVector<f64>,
    sigma2: f64,
    p_plus: f64,
}

impl ModelSpec {
    /// Builds a general two-component model. `sigma2` is the noise
    /// variance (zero is allowed and means noiseless responses) and
    /// `p_plus` the probability of the β₁ branch.
    pub fn new(beta1: DVector<f64>, beta2: DVector<f64>, sigma2: f64, p_plus: f64) -> Result<Self> {
        if beta1.is_empty() {
            return Err(Error::InvalidConfig("parameter dimension must be positive".into()));
        }
        if beta1.len() != beta2.len() {
            return Err(Error::DimensionMismatch {
                expected: beta1.len(),
                got: beta2.len(),
            });
        }
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be finite and non-negative, got {sigma2}"
            )));
        }
        if !(p_plus > 0.0 && p_plus < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mixing probability must lie strictly between 0 and 1, got {p_plus}"
            )));
        }
        if beta1.iter().chain(beta2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        Ok(Self {
            beta1,
            beta2,
            sigma2,
            p_plus,
        })
    }

    /// Symmetric model y = ±βᵀφ + w with balanced labels.
    pub fn symmetric(beta: DVector<f64>, sigma2: f64) -> Result<Self> {
        let neg = -&beta;
        Self::new(beta, neg, sigma2, 0.5)
    }

    pub fn dim(&self) -> usize {
        self.beta1.len()
    }

    pub fn beta1(&self) -> &DVector<f64> {
        &self.beta1
    }

    pub fn beta2(&self) -> &DVector<f64> {
        &self.beta2
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    /// True if β₂ = −β₁ entrywise.
    pub fn is_symmetric(&self) -> bool {
        self.beta1
            .iter()
            .zip(self.beta2.iter())
            .all(|(a, b)| *a == -*b)
    }

    /// Regression vector selected by `label`.
    pub fn branch(&self, label: Label) -> &DVector<f64> {
        match label {
            Label::Plus => &self.beta1,
            Label::Minus => &self.beta2,
        }
    }

    /// Noiseless response of the labelled branch.
    pub fn emit_mean(&self, label: Label, phi: &DVector<f64>) -> f64 {
        self.branch(label).dot(phi)
    }
}

/// One labelled stream element. The label is what estimators must not
/// see; it is exposed read-only for evaluation.
#[derive(Debug, Clone)]
pub struct Observation {
    pub k: u64,
    pub phi: DVector<f64>,
    pub y: f64,
    label: Label,
}

impl Observation {
    pub fn label(&self) -> Label {
        self.label
    }

    /// The unlabelled view an estimator consumes.
    pub fn sample(&self) -> Sample {
        Sample {
            phi: self.phi.clone(),
            y: self.y,
        }
    }
}

/// Unlabelled (regressor, response) pair.
#[derive(Debug, Clone)]
pub struct Sample {
    pub phi: DVector<f64>,
    pub y: f64,
}

enum RegressorSampler {
    IidGaussian { factor: DMatrix<f64> },
    Ar1 {
        dynamics: DMatrix<f64>,
        factor: DMatrix<f64>,
        state: DVector<f64>,
    },
    Sphere { radius: f64, dim: usize },
}

const AR1_BURN_IN: usize = 1_000;

fn gaussian_vector(rng: &mut ChaCha12Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

fn cholesky_factor(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::<f64, Dyn>::new(m.clone()).map(|c| c.l())
}

impl RegressorSampler {
    fn new(process: &RegressorProcess, init_rng: &mut ChaCha12Rng) -> Result<Self> {
        process.validate()?;
        match process {
            RegressorProcess::IidGaussian { covariance } => {
                let factor = cholesky_factor(covariance).ok_or_else(|| {
                    Error::Singular("regressor covariance has no Cholesky factor".into())
                })?;
                Ok(RegressorSampler::IidGaussian { factor })
            }
            RegressorProcess::Ar1 {
                dynamics,
                noise_covariance,
            } => {
                let factor = cholesky_factor(noise_covariance).ok_or_else(|| {
                    Error::Singular("innovation covariance has no Cholesky factor".into())
                })?;
                let stationary = process.stationary_second_moment()?;
                let d = dynamics.nrows();
                let state = match cholesky_factor(&stationary) {
                    Some(l) => &l * gaussian_vector(init_rng, d),
                    None => {
                        let mut state = DVector::zeros(d);
                        for _ in 0..AR1_BURN_IN {
                            state = dynamics * state + &factor * gaussian_vector(init_rng, d);
                        }
                        state
                    }
                };
                Ok(RegressorSampler::Ar1 {
                    dynamics: dynamics.clone(),
                    factor,
                    state,
                })
            }
            RegressorProcess::SphereUniform { radius, dim } => Ok(RegressorSampler::Sphere {
                radius: *radius,
                dim: *dim,
            }),
        }
    }

    fn next(&mut self, rng: &mut ChaCha12Rng) -> DVector<f64> {
        match self {
            RegressorSampler::IidGaussian { factor } => {
                let d = factor.nrows();
                &*factor * gaussian_vector(rng, d)
            }
            RegressorSampler::Ar1 {
                dynamics,
                factor,
                state,
            } => {
                let phi = state.clone();
                *state = &*dynamics * &*state + &*factor * gaussian_vector(rng, state.len());
                phi
            }
            RegressorSampler::Sphere { radius, dim } => loop {
                let z = gaussian_vector(rng, *dim);
                let norm = z.norm();
                if norm > 1e-150 {
                    return z * (*radius / norm);
                }
            },
        }
    }
}

/// The marginal stationary distribution of a regressor process, reduced
/// to something drawable: N(0, Σ) for iid Gaussian, N(0, Π) with Π the
/// stationary second moment for AR(1), and the uniform sphere law.
pub(crate) enum StationaryLaw {
    Gaussian { factor: DMatrix<f64> },
    Sphere { radius: f64, dim: usize },
}

impl StationaryLaw {
    pub(crate) fn for_process(process: &RegressorProcess) -> Result<Self> {
        process.validate()?;
        match process {
            RegressorProcess::SphereUniform { radius, dim } => Ok(StationaryLaw::Sphere {
                radius: *radius,
                dim: *dim,
            }),
            _ => {
                let moment = process.stationary_second_moment()?;
                let factor = cholesky_factor(&moment).ok_or_else(|| {
                    Error::Singular("stationary second moment has no Cholesky factor".into())
                })?;
                Ok(StationaryLaw::Gaussian { factor })
            }
        }
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha12Rng) -> DVector<f64> {
        match self {
            StationaryLaw::Gaussian { factor } => {
                let d = factor.nrows();
                factor * gaussian_vector(rng, d)
            }
            StationaryLaw::Sphere { radius, dim } => loop {
                let z = gaussian_vector(rng, *dim);
                let norm = z.norm();
                if norm > 1e-150 {
                    return z * (*radius / norm);
                }
            },
        }
    }
}

/// Draws independent regressors from the stationary law of a process.
/// Used for Monte Carlo expectations over the regressor distribution.
pub struct StationarySampler {
    law: StationaryLaw,
    rng: ChaCha12Rng,
}

impl StationarySampler {
    pub fn new(process: &RegressorProcess, seed: u64, replication: u64) -> Result<Self> {
        Ok(Self {
            law: StationaryLaw::for_process(process)?,
            rng: derive(seed, StreamKind::BoundsMc, replication),
        })
    }

    pub fn draw(&mut self) -> DVector<f64> {
        self.law.draw(&mut self.rng)
    }
}

/// Infinite labelled observation stream, deterministic in
/// (seed, replication). Labels, regressor innovations, noise, and the
/// initial AR(1) state each consume an independent derived RNG stream.
pub struct MlrStream {
    model: ModelSpec,
    sampler: RegressorSampler,
    labels: ChaCha12Rng,
    innovations: ChaCha12Rng,
    noise: ChaCha12Rng,
    sigma: f64,
    k: u64,
}

impl MlrStream {
    pub fn new(
        model: ModelSpec,
        process: &RegressorProcess,
        seed: u64,
        replication: u64,
    ) -> Result<Self> {
        if process.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: process.dim(),
            });
        }
        let mut init = derive(seed, StreamKind::Init, replication);
        let sampler = RegressorSampler::new(process, &mut init)?;
        Ok(Self {
            sigma: model.sigma2().sqrt(),
            model,
            sampler,
            labels: derive(seed, StreamKind::Labels, replication),
            innovations: derive(seed, StreamKind::Innovations, replication),
            noise: derive(seed, StreamKind::Noise, replication),
            k: 0,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }
}

impl Iterator for MlrStream {
    type Item = Observation;

    fn next(&mut self) -> Option<Observation> {
        self.k += 1;
        let phi = self.sampler.next(&mut self.innovations);
        let label = sample_label(&mut self.labels, self.model.p_plus());
        let w: f64 = self.noise.sample(StandardNormal);
        let y = self.model.emit_mean(label, &phi) + self.sigma * w;
        Some(Observation {
            k: self.k,
            phi,
            y,
            label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn iid_unit(d: usize) -> RegressorProcess {
        RegressorProcess::IidGaussian {
            covariance: DMatrix::identity(d, d),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ModelSpec::new(dvector![1.0], dvector![1.0, 2.0], 1.0, 0.5).is_err());
        assert!(ModelSpec::new(dvector![1.0], dvector![2.0], -1.0, 0.5).is_err());
        assert!(ModelSpec::new(dvector![1.0], dvector![2.0], 1.0, 0.0).is_err());
        assert!(ModelSpec::new(dvector![1.0], dvector![2.0], 1.0, 1.0).is_err());
        let unstable = RegressorProcess::Ar1 {
            dynamics: DMatrix::from_row_slice(1, 1, &[1.2]),
            noise_covariance: DMatrix::identity(1, 1),
        };
        assert!(unstable.validate().is_err());
        let flat = RegressorProcess::SphereUniform {
            radius: 0.0,
            dim: 2,
        };
        assert!(flat.validate().is_err());
    }

    #[test]
    fn symmetric_constructor_negates_and_balances() {
        let m = ModelSpec::symmetric(dvector![1.0, -2.0], 0.25).unwrap();
        assert!(m.is_symmetric());
        assert_eq!(m.beta2()[0], -1.0);
        assert_eq!(m.beta2()[1], 2.0);
        assert_eq!(m.p_plus(), 0.5);
    }

    #[test]
    fn label_frequency_tracks_mixing_probability() {
        let mut rng = derive(11, StreamKind::Labels, 0);
        let n = 40_000;
        let plus = (0..n)
            .filter(|_| sample_label(&mut rng, 0.3) == Label::Plus)
            .count();
        let freq = plus as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn iid_gaussian_sample_covariance_matches_target() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let model = ModelSpec::symmetric(dvector![1.0, 0.0], 1.0).unwrap();
        let stream = MlrStream::new(
            model,
            &RegressorProcess::IidGaussian {
                covariance: cov.clone(),
            },
            5,
            0,
        )
        .unwrap();
        let n = 60_000;
        let mut acc = DMatrix::zeros(2, 2);
        for obs in stream.take(n) {
            acc += &obs.phi * obs.phi.transpose();
        }
        acc /= n as f64;
        assert!((acc - cov).norm() < 0.05);
    }

    #[test]
    fn ar1_empirical_moment_matches_lyapunov_fixed_point() {
        let process = RegressorProcess::Ar1 {
            dynamics: DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.3]),
            noise_covariance: DMatrix::identity(2, 2),
        };
        let pi = process.stationary_second_moment().unwrap();
        assert!((pi[(0, 0)] - 1.4126265890971784).abs() < 1e-12);
        let model = ModelSpec::symmetric(dvector![1.0, 1.0], 1.0).unwrap();
        let stream = MlrStream::new(model, &process, 9, 0).unwrap();
        let n = 200_000;
        let mut acc = DMatrix::zeros(2, 2);
        for obs in stream.take(n) {
            acc += &obs.phi * obs.phi.transpose();
        }
        acc /= n as f64;
        let dev = (acc - pi).norm();
        assert!(dev < 0.05, "deviation {dev}");
    }

    #[test]
    fn sphere_regressors_have_exact_radius() {
        let model = ModelSpec::symmetric(dvector![1.0, 0.0, 0.0], 1.0).unwrap();
        let process = RegressorProcess::SphereUniform {
            radius: 2.5,
            dim: 3,
        };
        for obs in MlrStream::new(model, &process, 3, 0).unwrap().take(100) {
            assert!((obs.phi.norm() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn responses_follow_the_labelled_branch() {
        let model =
            ModelSpec::new(dvector![1.0, 2.0], dvector![-3.0, 0.5], 0.0, 0.5).unwrap();
        for obs in MlrStream::new(model.clone(), &iid_unit(2), 21, 0).unwrap().take(200) {
            let mean = model.emit_mean(obs.label(), &obs.phi);
            assert_eq!(obs.y, mean);
        }
    }

    #[test]
    fn noise_variance_is_respected() {
        let model = ModelSpec::symmetric(dvector![0.0, 0.0], 4.0).unwrap();
        let stream = MlrStream::new(model, &iid_unit(2), 17, 0).unwrap();
        let n = 50_000;
        let mut sum_sq = 0.0;
        for obs in stream.take(n) {
            sum_sq += obs.y * obs.y;
        }
        let var = sum_sq / n as f64;
        assert!((var - 4.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn streams_are_deterministic_and_replications_differ() {
        let model = ModelSpec::symmetric(dvector![1.0, -1.0], 1.0).unwrap();
        let grab = |rep: u64| -> Vec<f64> {
            MlrStream::new(model.clone(), &iid_unit(2), 42, rep)
                .unwrap()
                .take(20)
                .map(|o| o.y)
                .collect()
        };
        assert_eq!(grab(0), grab(0));
        assert_ne!(grab(0), grab(1));
    }

    #[test]
    fn stationary_sampler_matches_the_process_moment() {
        let process = RegressorProcess::Ar1 {
            dynamics: DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.3]),
            noise_covariance: DMatrix::identity(2, 2),
        };
        let pi = process.stationary_second_moment().unwrap();
        let mut sampler = StationarySampler::new(&process, 23, 0).unwrap();
        let n = 100_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let phi = sampler.draw();
            acc += &phi * phi.transpose();
        }
        acc /= n as f64;
        assert!((acc - pi).norm() < 0.05);
    }

    #[test]
    fn observation_indices_start_at_one() {
        let model = ModelSpec::symmetric(dvector![1.0], 1.0).unwrap();
        let ks: Vec<u64> = MlrStream::new(model, &iid_unit(1), 1, 0)
            .unwrap()
            .take(3)
            .map(|o| o.k)
            .collect();
        assert_eq!(ks, vec![1, 2, 3]);
    }
}
