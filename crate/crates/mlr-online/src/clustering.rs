//! Online cluster assignment and its theoretical performance limits.
//!
//! New observations are assigned to the mixture branch with the smaller
//! squared residual. [`ClusterReport`] accumulates the within-cluster
//! error J (mean squared chosen residual) and the correct-assignment
//! rate. [`BoundSpec`] evaluates the matching population quantities: a
//! lower bound on the long-run correct rate and the limit of J, both as
//! expectations over the stationary regressor law.

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use crate::datagen::Label;
use crate::error::{Error, Result};

/// Φ(x), evaluated through erfc so deep tails keep relative accuracy.
fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density Φ′(x).
fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Branch index chosen for (φ, y) in the symmetric model with parameter
/// β: index 2 is the +β branch, index 1 the −β branch, ties to 1.
pub fn classify_sym(beta: &DVector<f64>, phi: &DVector<f64>, y: f64) -> usize {
    assign_sym(beta, phi, y).index
}

/// Branch index chosen for (φ, y) in the general model: the βᵢ with the
/// smaller squared residual, ties to 1.
pub fn classify_asym(
    beta1: &DVector<f64>,
    beta2: &DVector<f64>,
    phi: &DVector<f64>,
    y: f64,
) -> usize {
    assign_asym(beta1, beta2, phi, y).index
}

/// A branch choice together with its squared residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub index: usize,
    pub residual_sq: f64,
}

/// Symmetric-model assignment with the chosen squared residual.
pub fn assign_sym(beta: &DVector<f64>, phi: &DVector<f64>, y: f64) -> Assignment {
    let b = beta.dot(phi);
    let r_minus = (y + b) * (y + b);
    let r_plus = (y - b) * (y - b);
    if r_plus < r_minus {
        Assignment {
            index: 2,
            residual_sq: r_plus,
        }
    } else {
        Assignment {
            index: 1,
            residual_sq: r_minus,
        }
    }
}

/// General-model assignment with the chosen squared residual.
pub fn assign_asym(
    beta1: &DVector<f64>,
    beta2: &DVector<f64>,
    phi: &DVector<f64>,
    y: f64,
) -> Assignment {
    let r1 = y - beta1.dot(phi);
    let r2 = y - beta2.dot(phi);
    let (sq1, sq2) = (r1 * r1, r2 * r2);
    if sq2 < sq1 {
        Assignment {
            index: 2,
            residual_sq: sq2,
        }
    } else {
        Assignment {
            index: 1,
            residual_sq: sq1,
        }
    }
}

/// Index a correctly classified symmetric observation carries: the +β
/// branch (label `Plus`) is index 2 under [`classify_sym`]'s convention.
pub fn sym_truth_index(label: Label) -> usize {
    match label {
        Label::Plus => 2,
        Label::Minus => 1,
    }
}

/// Index a correctly classified general observation carries: β₁ is
/// index 1, β₂ is index 2.
pub fn asym_truth_index(label: Label) -> usize {
    label.index()
}

/// Running clustering quality accumulator. Merging two reports gives the
/// report of the concatenated data, so shards combine freely.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClusterReport {
    n: u64,
    sum_sq: f64,
    correct: u64,
}

impl ClusterReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one assignment: its squared residual and whether it
    /// matched the hidden label.
    pub fn record(&mut self, residual_sq: f64, was_correct: bool) -> Result<()> {
        if !(residual_sq >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "squared residual must be non-negative, got {residual_sq}"
            )));
        }
        self.n += 1;
        self.sum_sq += residual_sq;
        if was_correct {
            self.correct += 1;
        }
        Ok(())
    }

    pub fn merge(&self, other: &ClusterReport) -> ClusterReport {
        ClusterReport {
            n: self.n + other.n,
            sum_sq: self.sum_sq + other.sum_sq,
            correct: self.correct + other.correct,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn correct(&self) -> u64 {
        self.correct
    }

    /// Mean squared chosen residual, 0 on an empty report.
    pub fn j(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum_sq / self.n as f64
        }
    }

    /// Fraction of assignments matching the hidden label, 0 on an empty
    /// report.
    pub fn correct_rate(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 / self.n as f64
        }
    }
}

/// Population-level inputs for the clustering performance limits.
///
/// Both model families reduce to one parametrization: a separation
/// vector δ, an effective noise scale σ_eff, and a weight on the
/// within-cluster error correction term. The long-run correct rate is
/// bounded below by 1 − E[exp(−(δᵀφ)²/(2σ_eff²))] and the within-cluster
/// error J converges to σ² + weight·E[η(|δᵀφ|, σ_eff)].
#[derive(Debug, Clone)]
pub struct BoundSpec {
    delta: DVector<f64>,
    sigma2: f64,
    sigma_eff: f64,
    eta_weight: f64,
}

impl BoundSpec {
    /// Symmetric model y = ±β*ᵀφ + w: δ = β*, σ_eff = σ, weight 4.
    pub fn symmetric(beta_star: DVector<f64>, sigma: f64) -> Result<Self> {
        Self::build(beta_star, sigma, sigma, 4.0)
    }

    /// General model: δ = β₁* − β₂*, σ_eff = 2σ, weight 1.
    pub fn asymmetric(beta1: &DVector<f64>, beta2: &DVector<f64>, sigma: f64) -> Result<Self> {
        Self::build(beta1 - beta2, sigma, 2.0 * sigma, 1.0)
    }

    fn build(delta: DVector<f64>, sigma: f64, sigma_eff: f64, eta_weight: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise level must be positive and finite, got {sigma}"
            )));
        }
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("separation vector must be finite".into()));
        }
        Ok(Self {
            delta,
            sigma2: sigma * sigma,
            sigma_eff,
            eta_weight,
        })
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    fn check_samples(samples: u64) -> Result<()> {
        if samples < 1_000 {
            return Err(Error::InvalidConfig(format!(
                "bound estimation needs at least 1000 samples, got {samples}"
            )));
        }
        Ok(())
    }

    /// Monte Carlo lower bound on the long-run correct-assignment rate,
    /// returned with its standard error. `draw_phi` must sample the
    /// stationary regressor law.
    pub fn correct_rate_bound_mc(
        &self,
        mut draw_phi: impl FnMut() -> DVector<f64>,
        samples: u64,
    ) -> Result<(f64, f64)> {
        Self::check_samples(samples)?;
        let inv_two_var = 1.0 / (2.0 * self.sigma_eff * self.sigma_eff);
        let mut acc = MeanAccumulator::new();
        for _ in 0..samples {
            let s = self.delta.dot(&draw_phi());
            acc.push((-s * s * inv_two_var).exp());
        }
        let (mean, se) = acc.finish();
        Ok((1.0 - mean, se))
    }

    /// Closed-form correct-rate bound for Gaussian regressors with the
    /// given second moment: 1 − 1/√(1 + δᵀΣδ/σ_eff²).
    pub fn correct_rate_bound_gaussian(&self, second_moment: &DMatrix<f64>) -> Result<f64> {
        let d = self.delta.len();
        if second_moment.nrows() != d || second_moment.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: second_moment.nrows(),
            });
        }
        let q = (second_moment * &self.delta).dot(&self.delta);
        if q < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "second moment produced a negative quadratic form {q}"
            )));
        }
        Ok(gaussian_bound_from_quadform(q, self.sigma_eff))
    }

    /// Monte Carlo limit of the within-cluster error J, with standard
    /// error. Every sampled η must be non-positive; a positive value
    /// beyond rounding noise is reported as a consistency failure.
    pub fn j_limit_mc(
        &self,
        mut draw_phi: impl FnMut() -> DVector<f64>,
        samples: u64,
    ) -> Result<(f64, f64)> {
        Self::check_samples(samples)?;
        let mut acc = MeanAccumulator::new();
        for _ in 0..samples {
            let s = self.delta.dot(&draw_phi()).abs();
            let e = eta(s, self.sigma_eff);
            if e > 1e-12 {
                return Err(Error::Consistency(format!(
                    "eta({s}, {}) = {e} is positive",
                    self.sigma_eff
                )));
            }
            acc.push(e);
        }
        let (mean, se) = acc.finish();
        Ok((self.sigma2 + self.eta_weight * mean, self.eta_weight * se))
    }
}

/// 1 − 1/√(1 + q/σ_eff²) with q the variance of δᵀφ.
pub fn gaussian_bound_from_quadform(q: f64, sigma_eff: f64) -> f64 {
    1.0 - 1.0 / (1.0 + q / (sigma_eff * sigma_eff)).sqrt()
}

/// η(s, σ_e) = s²Φ(−s/σ_e) − σ_e·s·Φ′(s/σ_e) for s ≥ 0, the per-regressor
/// reduction of the within-cluster error below the noise floor. Always
/// non-positive.
fn eta(s: f64, sigma_eff: f64) -> f64 {
    let t = s / sigma_eff;
    s * s * standard_normal_cdf(-t) - sigma_eff * s * standard_normal_pdf(t)
}

struct MeanAccumulator {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl MeanAccumulator {
    fn new() -> Self {
        Self {
            n: 0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn finish(&self) -> (f64, f64) {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}
