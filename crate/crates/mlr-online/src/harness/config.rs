//! JSON-backed experiment configuration and its conversion into
//! validated domain objects.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::asym_em::ResidualTiming;
use crate::datagen::{ModelSpec, RegressorProcess};
use crate::error::{Error, Result};
use crate::rng::{derive, StreamKind};

fn default_horizon() -> u64 {
    100_000
}

fn default_replications() -> u32 {
    20
}

fn default_seed() -> u64 {
    1
}

fn default_kappa_grid() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0, 20.0]
}

/// Top-level experiment settings. Any field left out of the JSON file
/// falls back to the defaults below, which reproduce the reference
/// three-dimensional mixed-regression setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub horizon: u64,
    pub replications: u32,
    pub seed: u64,
    pub kappa_grid: Vec<f64>,
    pub pop_em: PopEmSettings,
    pub init_policy: InitPolicyConfig,
    pub output_dir: Option<PathBuf>,
    pub whiten: bool,
    /// Noise variance handed to the estimators; leaving it unset uses the
    /// data-generating variance. Setting it differently runs the
    /// estimators under a misspecified noise scale.
    pub estimator_sigma2: Option<f64>,
    pub residual_timing: ResidualTimingSetting,
    pub ode: OdeSettings,
    pub bounds: BoundsSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            horizon: default_horizon(),
            replications: default_replications(),
            seed: default_seed(),
            kappa_grid: default_kappa_grid(),
            pop_em: PopEmSettings::default(),
            init_policy: InitPolicyConfig::default(),
            output_dir: None,
            whiten: false,
            estimator_sigma2: None,
            residual_timing: ResidualTimingSetting::default(),
            ode: OdeSettings::default(),
            bounds: BoundsSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks every cross-field constraint and that the model and
    /// process construct cleanly, so later stages can assume a sane
    /// configuration.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        for &kappa in &self.kappa_grid {
            if !kappa.is_finite() || kappa < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "kappa entries must be finite and nonnegative, got {kappa}"
                )));
            }
        }
        if self.kappa_grid.is_empty() {
            return Err(Error::InvalidConfig("kappa_grid must be nonempty".into()));
        }
        if let Some(s2) = self.estimator_sigma2 {
            if !s2.is_finite() || s2 < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "estimator_sigma2 must be finite and nonnegative, got {s2}"
                )));
            }
        }
        self.pop_em.validate()?;
        self.ode.validate()?;
        self.bounds.validate()?;
        let model = self.model.to_model()?;
        let process = self.model.to_process()?;
        if process.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: process.dim(),
            });
        }
        Ok(())
    }

    /// Noise variance the estimators run with.
    pub fn estimator_sigma2_for(&self, model: &ModelSpec) -> f64 {
        self.estimator_sigma2.unwrap_or_else(|| model.sigma2())
    }
}

/// Data-generating mixture and regressor process.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub sigma2: f64,
    pub p_plus: f64,
    pub regressors: RegressorConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            beta1: vec![1.0, 15.0, 13.0],
            beta2: vec![-10.0, -11.0, -12.0],
            sigma2: 1.0,
            p_plus: 0.5,
            regressors: RegressorConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn to_model(&self) -> Result<ModelSpec> {
        ModelSpec::new(
            DVector::from_vec(self.beta1.clone()),
            DVector::from_vec(self.beta2.clone()),
            self.sigma2,
            self.p_plus,
        )
    }

    pub fn to_process(&self) -> Result<RegressorProcess> {
        let process = self.regressors.to_process()?;
        process.validate()?;
        Ok(process)
    }
}

/// Stationary regressor law driving the stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegressorConfig {
    IidGaussian {
        covariance: Vec<Vec<f64>>,
    },
    Ar1 {
        dynamics: Vec<Vec<f64>>,
        noise_covariance: Vec<Vec<f64>>,
    },
    SphereUniform {
        radius: f64,
        dim: usize,
    },
}

impl Default for RegressorConfig {
    fn default() -> Self {
        let half_identity = vec![
            vec![0.5, 0.0, 0.0],
            vec![0.0, 0.5, 0.0],
            vec![0.0, 0.0, 0.5],
        ];
        let identity = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        RegressorConfig::Ar1 {
            dynamics: half_identity,
            noise_covariance: identity,
        }
    }
}

impl RegressorConfig {
    pub fn to_process(&self) -> Result<RegressorProcess> {
        match self {
            RegressorConfig::IidGaussian { covariance } => Ok(RegressorProcess::IidGaussian {
                covariance: square_matrix(covariance, "covariance")?,
            }),
            RegressorConfig::Ar1 {
                dynamics,
                noise_covariance,
            } => Ok(RegressorProcess::Ar1 {
                dynamics: square_matrix(dynamics, "dynamics")?,
                noise_covariance: square_matrix(noise_covariance, "noise_covariance")?,
            }),
            RegressorConfig::SphereUniform { radius, dim } => Ok(RegressorProcess::SphereUniform {
                radius: *radius,
                dim: *dim,
            }),
        }
    }
}

fn square_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidConfig(format!("{what} must be nonempty")));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidConfig(format!(
            "{what} must be square, got {n} rows with uneven lengths"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// How estimator starting points are chosen.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitPolicyConfig {
    /// Fixed start for the sign-symmetric estimator.
    FixedSym { beta0: Vec<f64> },
    /// Fixed centroid and half-gap start for the two-branch estimator.
    FixedAsym { theta1: Vec<f64>, theta2: Vec<f64> },
    /// Every coordinate drawn uniformly within `kappa` of the matching
    /// true coordinate.
    KappaUniform { kappa: f64 },
}

impl Default for InitPolicyConfig {
    fn default() -> Self {
        InitPolicyConfig::FixedAsym {
            theta1: vec![15.0, 20.0, 100.0],
            theta2: vec![-42.0, -35.0, -30.0],
        }
    }
}

/// A drawn or fixed start for the two-branch estimator, with the number
/// of zero-half-gap redraws it took to produce it.
#[derive(Debug, Clone)]
pub struct AsymInit {
    pub theta1: DVector<f64>,
    pub theta2: DVector<f64>,
    pub redraws: u32,
}

const MAX_REDRAWS: u32 = 100;

impl InitPolicyConfig {
    /// Start vector for the sign-symmetric estimator.
    pub fn resolve_sym(
        &self,
        model: &ModelSpec,
        seed: u64,
        replication: u64,
    ) -> Result<DVector<f64>> {
        match self {
            InitPolicyConfig::FixedSym { beta0 } => {
                check_dim(beta0.len(), model.dim())?;
                Ok(DVector::from_vec(beta0.clone()))
            }
            InitPolicyConfig::KappaUniform { kappa } => {
                let mut rng = derive(seed, StreamKind::PolicyInit, replication);
                let mut redraws = 0;
                loop {
                    let beta0 = uniform_around(model.beta1(), *kappa, &mut rng)?;
                    if beta0.iter().any(|x| *x != 0.0) {
                        return Ok(beta0);
                    }
                    redraws += 1;
                    if redraws > MAX_REDRAWS {
                        return Err(Error::InvalidConfig(
                            "initialization keeps drawing the excluded zero vector".into(),
                        ));
                    }
                }
            }
            InitPolicyConfig::FixedAsym { .. } => Err(Error::InvalidConfig(
                "init_policy fixed_asym targets the two-branch estimator; use fixed_sym or kappa_uniform".into(),
            )),
        }
    }

    /// Start pair for the two-branch estimator.
    pub fn resolve_asym(&self, model: &ModelSpec, seed: u64, replication: u64) -> Result<AsymInit> {
        match self {
            InitPolicyConfig::FixedAsym { theta1, theta2 } => {
                check_dim(theta1.len(), model.dim())?;
                check_dim(theta2.len(), model.dim())?;
                Ok(AsymInit {
                    theta1: DVector::from_vec(theta1.clone()),
                    theta2: DVector::from_vec(theta2.clone()),
                    redraws: 0,
                })
            }
            InitPolicyConfig::KappaUniform { kappa } => {
                kappa_uniform_asym(model, *kappa, seed, replication)
            }
            InitPolicyConfig::FixedSym { .. } => Err(Error::InvalidConfig(
                "init_policy fixed_sym targets the sign-symmetric estimator; use fixed_asym or kappa_uniform".into(),
            )),
        }
    }
}

/// Draws branch starts coordinatewise within `kappa` of the true
/// branches and maps them to the centroid and half-gap start. A drawn
/// zero half-gap (excluded by the estimator) is redrawn and counted.
pub fn kappa_uniform_asym(
    model: &ModelSpec,
    kappa: f64,
    seed: u64,
    replication: u64,
) -> Result<AsymInit> {
    let mut rng = derive(seed, StreamKind::PolicyInit, replication);
    let mut redraws = 0;
    loop {
        let beta1 = uniform_around(model.beta1(), kappa, &mut rng)?;
        let beta2 = uniform_around(model.beta2(), kappa, &mut rng)?;
        let theta1 = (&beta1 + &beta2) * 0.5;
        let theta2 = (&beta1 - &beta2) * 0.5;
        if theta2.iter().any(|x| *x != 0.0) {
            return Ok(AsymInit {
                theta1,
                theta2,
                redraws,
            });
        }
        redraws += 1;
        if redraws > MAX_REDRAWS {
            return Err(Error::InvalidConfig(
                "initialization keeps drawing a zero half-gap; the true branches may coincide"
                    .into(),
            ));
        }
    }
}

fn uniform_around(center: &DVector<f64>, kappa: f64, rng: &mut ChaCha12Rng) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(center.len());
    for j in 0..center.len() {
        let dist = Uniform::new_inclusive(center[j] - kappa, center[j] + kappa)
            .map_err(|e| Error::InvalidConfig(format!("initialization interval: {e}")))?;
        v[j] = dist.sample(rng);
    }
    Ok(v)
}

fn check_dim(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Batch EM baseline settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopEmSettings {
    pub n_samples: usize,
    #[serde(rename = "T")]
    pub iterations: usize,
    pub abort_on_vanishing_likelihood: bool,
}

impl Default for PopEmSettings {
    fn default() -> Self {
        Self {
            n_samples: 5_000,
            iterations: 20,
            abort_on_vanishing_likelihood: true,
        }
    }
}

impl PopEmSettings {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.iterations == 0 {
            return Err(Error::InvalidConfig(
                "pop_em needs n_samples >= 1 and T >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which centroid iterate feeds the two-branch innovation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualTimingSetting {
    #[default]
    PreUpdate,
    PostUpdate,
}

impl ResidualTimingSetting {
    pub fn to_timing(self) -> ResidualTiming {
        match self {
            ResidualTimingSetting::PreUpdate => ResidualTiming::PreUpdate,
            ResidualTimingSetting::PostUpdate => ResidualTiming::PostUpdate,
        }
    }
}

/// Mean-field integration settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeSettings {
    pub horizon: f64,
    pub step: f64,
    pub field_samples: usize,
    /// Integration start; defaults to half the true parameter.
    pub beta0: Option<Vec<f64>>,
    /// The initial second-moment state is this multiple of the
    /// stationary one.
    pub r0_scale: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            horizon: 50.0,
            step: 0.01,
            field_samples: 50_000,
            beta0: None,
            r0_scale: 1.0,
        }
    }
}

impl OdeSettings {
    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !(self.step > 0.0) || self.step > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "ode needs 0 < step <= horizon, got step {}, horizon {}",
                self.step, self.horizon
            )));
        }
        if !(self.r0_scale > 0.0) || !self.r0_scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ode.r0_scale must be positive and finite, got {}",
                self.r0_scale
            )));
        }
        Ok(())
    }
}

/// Sample sizes for the bound-versus-empirical study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSettings {
    /// Streaming steps the estimator trains for before evaluation. The
    /// 5% within-cluster-error window needs the estimate noise floor
    /// well below the noise variance, hence the long default.
    pub train_horizon: u64,
    /// Fresh labelled points classified with the trained estimates.
    pub eval_points: u64,
    /// Monte Carlo draws behind the bound and limit estimates.
    pub mc_samples: u64,
}

impl Default for BoundsSettings {
    fn default() -> Self {
        Self {
            train_horizon: 1_000_000,
            eval_points: 100_000,
            mc_samples: 1_000_000,
        }
    }
}

impl BoundsSettings {
    fn validate(&self) -> Result<()> {
        if self.train_horizon == 0 {
            return Err(Error::InvalidConfig(
                "bounds.train_horizon must be at least 1".into(),
            ));
        }
        if self.eval_points == 0 {
            return Err(Error::InvalidConfig(
                "bounds.eval_points must be at least 1".into(),
            ));
        }
        if self.mc_samples < 1_000 {
            return Err(Error::InvalidConfig(
                "bounds.mc_samples must be at least 1000".into(),
            ));
        }
        Ok(())
    }
}
