//! Mean-field companion of the symmetric streaming estimator.
//!
//! The estimator's average motion is governed by the coupled ODEs
//! dβ/dt = R⁻¹f(β) and dR/dt = G − R, where f(β) is the expected update
//! direction E[φ(y·tanh(βᵀφy/σ²) − βᵀφ)] over the stationary data law
//! and G = E[φφᵀ]. This module evaluates f by Monte Carlo over a frozen
//! sample bank (common random numbers, so the field is a fixed smooth
//! function within a run), integrates the ODEs with fixed-step RK4 while
//! checking R against its closed form G + e^{−t}(R(0) − G), tracks the
//! Lyapunov energy ½(β−β_ref)ᵀR(β−β_ref), and provides quadrature
//! oracles for the two scalar identities the convergence argument rests
//! on.

use nalgebra::{DMatrix, DVector};

use crate::datagen::{sample_label, ModelSpec, RegressorProcess, StationaryLaw};
use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::quadrature;
use crate::rng::{derive, StreamKind};
use crate::tanh_scaled;
use rand_distr::{Distribution, StandardNormal};

/// Frozen-bank evaluator of the mean field and integrator of the
/// associated ODEs, for a symmetric model.
pub struct OdeLab {
    phi: DMatrix<f64>,
    y: DVector<f64>,
    bank_moment: DMatrix<f64>,
    g: DMatrix<f64>,
    beta_star: DVector<f64>,
    sigma2: f64,
}

/// One recorded integration step.
#[derive(Debug, Clone)]
pub struct OdePoint {
    pub t: f64,
    pub beta: DVector<f64>,
    /// Lyapunov energy against the sign-aligned true parameter.
    pub v: f64,
    /// Frobenius distance between the integrated R and its closed form.
    pub r_closed_form_err: f64,
}

/// Full integration output: the per-step trace and the final R.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<OdePoint>,
    pub final_r: DMatrix<f64>,
}

impl Trajectory {
    pub fn final_beta(&self) -> &DVector<f64> {
        &self.points.last().expect("trajectory has at least the initial point").beta
    }
}

const MIN_BANK: usize = 1_000;

impl OdeLab {
    /// Freezes a bank of `samples` labelled draws from the model and the
    /// stationary regressor law. The model must be symmetric with
    /// positive noise variance (the regime the mean-field analysis
    /// covers).
    pub fn new(
        model: &ModelSpec,
        process: &RegressorProcess,
        samples: usize,
        seed: u64,
        replication: u64,
    ) -> Result<Self> {
        if !model.is_symmetric() {
            return Err(Error::InvalidConfig(
                "the mean-field lab covers the symmetric model only".into(),
            ));
        }
        if !(model.sigma2() > 0.0) {
            return Err(Error::InvalidConfig(
                "the mean-field lab needs a positive noise variance".into(),
            ));
        }
        if samples < MIN_BANK {
            return Err(Error::InvalidConfig(format!(
                "field bank needs at least {MIN_BANK} samples, got {samples}"
            )));
        }
        if process.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: process.dim(),
            });
        }
        let law = StationaryLaw::for_process(process)?;
        let mut rng = derive(seed, StreamKind::OdeBank, replication);
        let d = model.dim();
        let sigma = model.sigma2().sqrt();
        let mut phi = DMatrix::zeros(d, samples);
        let mut y = DVector::zeros(samples);
        let mut bank_moment = DMatrix::zeros(d, d);
        for i in 0..samples {
            let x = law.draw(&mut rng);
            let label = sample_label(&mut rng, model.p_plus());
            let w: f64 = StandardNormal.sample(&mut rng);
            y[i] = model.emit_mean(label, &x) + sigma * w;
            bank_moment.ger(1.0 / samples as f64, &x, &x, 1.0);
            phi.set_column(i, &x);
        }
        Ok(Self {
            phi,
            y,
            bank_moment,
            g: process.stationary_second_moment()?,
            beta_star: model.beta1().clone(),
            sigma2: model.sigma2(),
        })
    }

    pub fn samples(&self) -> usize {
        self.y.len()
    }

    /// The analytic G = E[φφᵀ] driving the R dynamics.
    pub fn second_moment(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// The bank's empirical second moment, a Monte Carlo cross-check of
    /// [`OdeLab::second_moment`].
    pub fn bank_second_moment(&self) -> &DMatrix<f64> {
        &self.bank_moment
    }

    fn field_into(&self, beta: &DVector<f64>, work: &mut DVector<f64>, out: &mut DVector<f64>) {
        work.gemv_tr(1.0, &self.phi, beta, 0.0);
        for i in 0..work.len() {
            let s = work[i];
            let y = self.y[i];
            work[i] = y * tanh_scaled(s * y, self.sigma2) - s;
        }
        out.gemv(1.0 / self.y.len() as f64, &self.phi, work, 0.0);
    }

    /// Mean update direction at `beta`, averaged over the frozen bank.
    pub fn field(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(beta)?;
        let mut work = DVector::zeros(self.y.len());
        let mut out = DVector::zeros(beta.len());
        self.field_into(beta, &mut work, &mut out);
        Ok(out)
    }

    /// Mean update direction together with the per-coordinate standard
    /// error of the bank average.
    pub fn field_with_se(&self, beta: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_dim(beta)?;
        let d = beta.len();
        let n = self.y.len();
        let mut mean = DVector::<f64>::zeros(d);
        let mut m2 = DVector::<f64>::zeros(d);
        for i in 0..n {
            let col = self.phi.column(i);
            let s = col.dot(beta);
            let y = self.y[i];
            let scale = y * tanh_scaled(s * y, self.sigma2) - s;
            for j in 0..d {
                let v = col[j] * scale;
                let delta = v - mean[j];
                mean[j] += delta / (i + 1) as f64;
                m2[j] += delta * (v - mean[j]);
            }
        }
        let se = DVector::from_fn(d, |j, _| (m2[j] / ((n - 1) as f64 * n as f64)).sqrt());
        Ok((mean, se))
    }

    fn check_dim(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.phi.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.phi.nrows(),
                got: beta.len(),
            });
        }
        Ok(())
    }

    /// Integrates the coupled ODEs from (beta0, r0) to `horizon` with
    /// fixed-step RK4 (the step is rounded so the horizon is hit
    /// exactly). Records every step with the Lyapunov energy against
    /// the sign-aligned truth and the R closed-form deviation; fails if
    /// R ever stops being positive definite.
    pub fn integrate(
        &self,
        beta0: &DVector<f64>,
        r0: &DMatrix<f64>,
        horizon: f64,
        step: f64,
    ) -> Result<Trajectory> {
        self.check_dim(beta0)?;
        let d = beta0.len();
        if r0.nrows() != d || r0.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r0.nrows(),
            });
        }
        if !(horizon > 0.0) || !(step > 0.0) || step > horizon {
            return Err(Error::InvalidConfig(format!(
                "need 0 < step <= horizon, got step {step}, horizon {horizon}"
            )));
        }
        let steps = (horizon / step).round().max(1.0) as usize;
        let h = horizon / steps as f64;
        let beta_ref = aligned_reference(beta0, &self.beta_star);
        let r0_sym = symmetrize(r0);
        let drift = &r0_sym - &self.g;

        let mut beta = beta0.clone();
        let mut r = r0_sym;
        let mut work = DVector::zeros(self.y.len());
        let mut f_buf = DVector::zeros(d);
        let mut points = Vec::with_capacity(steps + 1);
        let record =
            |points: &mut Vec<OdePoint>, t: f64, beta: &DVector<f64>, r: &DMatrix<f64>| {
                let closed = &self.g + &drift * (-t).exp();
                points.push(OdePoint {
                    t,
                    beta: beta.clone(),
                    v: lyapunov(beta, r, &beta_ref),
                    r_closed_form_err: (r - closed).norm(),
                });
            };
        record(&mut points, 0.0, &beta, &r);

        for i in 0..steps {
            let t = i as f64 * h;
            let (kb1, kr1) = self.stage(&beta, &r, t, &mut work, &mut f_buf)?;
            let (kb2, kr2) = self.stage(
                &(&beta + &kb1 * (h / 2.0)),
                &(&r + &kr1 * (h / 2.0)),
                t,
                &mut work,
                &mut f_buf,
            )?;
            let (kb3, kr3) = self.stage(
                &(&beta + &kb2 * (h / 2.0)),
                &(&r + &kr2 * (h / 2.0)),
                t,
                &mut work,
                &mut f_buf,
            )?;
            let (kb4, kr4) = self.stage(
                &(&beta + &kb3 * h),
                &(&r + &kr3 * h),
                t,
                &mut work,
                &mut f_buf,
            )?;
            beta += (kb1 + kb2 * 2.0 + kb3 * 2.0 + kb4) * (h / 6.0);
            r += (kr1 + kr2 * 2.0 + kr3 * 2.0 + kr4) * (h / 6.0);
            r = symmetrize(&r);
            record(&mut points, (i + 1) as f64 * h, &beta, &r);
        }
        Ok(Trajectory { points, final_r: r })
    }

    fn stage(
        &self,
        beta: &DVector<f64>,
        r: &DMatrix<f64>,
        t: f64,
        work: &mut DVector<f64>,
        f_buf: &mut DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let chol = r.clone().cholesky().ok_or_else(|| {
            Error::Singular(format!("R lost positive definiteness near t = {t}"))
        })?;
        self.field_into(beta, work, f_buf);
        let dbeta = chol.solve(f_buf);
        let dr = &self.g - r;
        Ok((dbeta, dr))
    }
}

/// Energy ½(β − β_ref)ᵀ R (β − β_ref).
pub fn lyapunov(beta: &DVector<f64>, r: &DMatrix<f64>, beta_ref: &DVector<f64>) -> f64 {
    let diff = beta - beta_ref;
    0.5 * (r * &diff).dot(&diff)
}

/// The limit the trajectory from `beta0` is attracted to: β* if the
/// start has positive alignment with β*, −β* if negative, and the origin
/// on the measure-zero separating set.
pub fn aligned_reference(beta0: &DVector<f64>, beta_star: &DVector<f64>) -> DVector<f64> {
    let dot = beta0.dot(beta_star);
    if dot > 0.0 {
        beta_star.clone()
    } else if dot < 0.0 {
        -beta_star
    } else {
        DVector::zeros(beta_star.len())
    }
}

/// Quadrature evaluation of E[y·tanh(ay/σ²)] for
/// y ~ p·N(a,σ²) + (1−p)·N(−a,σ²), which the theory asserts equals `a`
/// for every mixing weight p.
pub fn lemma3_oracle(a: f64, sigma: f64, p: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise level must be positive and finite, got {sigma}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "mixing weight must lie in [0, 1], got {p}"
        )));
    }
    let sigma2 = sigma * sigma;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let half_width = a.abs() + 14.0 * sigma;
    quadrature::integrate(
        |y| {
            let up = (y - a) / sigma;
            let dn = (y + a) / sigma;
            let density = norm
                * (p * (-0.5 * up * up).exp() + (1.0 - p) * (-0.5 * dn * dn).exp());
            y * tanh_scaled(a * y, sigma2) * density
        },
        -half_width,
        half_width,
        1e-9,
    )
}

/// The monotone comparison integral
/// F(c, x) = ∫ [(w+x)·tanh(c(w+x)/σ²) + (w−x)·tanh(c(w−x)/σ²)]·e^{−w²/2σ²} dw.
pub fn lemma5_value(c: f64, x: f64, sigma: f64) -> Result<f64> {
    if !(c > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need c > 0 and sigma > 0, got c = {c}, sigma = {sigma}"
        )));
    }
    let sigma2 = sigma * sigma;
    let half_width = x.abs() + 16.0 * sigma;
    quadrature::integrate(
        |w| {
            let f = (w + x) * tanh_scaled(c * (w + x), sigma2)
                + (w - x) * tanh_scaled(c * (w - x), sigma2);
            f * (-w * w / (2.0 * sigma2)).exp()
        },
        -half_width,
        half_width,
        1e-9,
    )
}

/// F(c, ·) evaluated on a grid, with the strict-monotonicity verdict the
/// convergence argument needs.
#[derive(Debug, Clone)]
pub struct Lemma5Report {
    pub values: Vec<f64>,
    pub strictly_increasing: bool,
}

pub fn lemma5_oracle(c: f64, x_grid: &[f64], sigma: f64) -> Result<Lemma5Report> {
    if x_grid.is_empty() {
        return Err(Error::InvalidConfig("x grid must be non-empty".into()));
    }
    if x_grid.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidConfig("x grid must be strictly positive".into()));
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("x grid must be strictly increasing".into()));
    }
    let values = x_grid
        .iter()
        .map(|&x| lemma5_value(c, x, sigma))
        .collect::<Result<Vec<_>>>()?;
    let strictly_increasing = values.windows(2).all(|w| w[1] > w[0]);
    Ok(Lemma5Report {
        values,
        strictly_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn unit_gaussian(d: usize) -> RegressorProcess {
        RegressorProcess::IidGaussian {
            covariance: DMatrix::identity(d, d),
        }
    }

    fn small_lab() -> OdeLab {
        let model = ModelSpec::symmetric(dvector![2.0, -1.0], 1.0).unwrap();
        OdeLab::new(&model, &unit_gaussian(2), 20_000, 6101, 0).unwrap()
    }

    #[test]
    fn rejects_asymmetric_and_noiseless_models() {
        let asym = ModelSpec::new(dvector![1.0], dvector![2.0], 1.0, 0.5).unwrap();
        assert!(OdeLab::new(&asym, &unit_gaussian(1), 2_000, 1, 0).is_err());
        let noiseless = ModelSpec::symmetric(dvector![1.0], 0.0).unwrap();
        assert!(OdeLab::new(&noiseless, &unit_gaussian(1), 2_000, 1, 0).is_err());
    }

    #[test]
    fn field_vanishes_at_the_invariant_points_and_not_elsewhere() {
        let lab = small_lab();
        let truth = dvector![2.0, -1.0];
        assert_eq!(lab.field(&DVector::zeros(2)).unwrap(), DVector::zeros(2));
        for beta in [truth.clone(), -&truth] {
            let (f, se) = lab.field_with_se(&beta).unwrap();
            assert!(f.norm() <= 3.0 * se.norm(), "f {f} se {se}");
        }
        let generic = dvector![-1.0, 2.0];
        let (f, se) = lab.field_with_se(&generic).unwrap();
        assert!(f.norm() >= 10.0 * se.norm(), "f {f} se {se}");
    }

    #[test]
    fn bank_moment_approximates_the_analytic_second_moment() {
        let lab = small_lab();
        let dev = (lab.bank_second_moment() - lab.second_moment()).norm();
        assert!(dev < 0.05, "deviation {dev}");
    }

    #[test]
    fn gain_dynamics_match_the_closed_form_exponential() {
        let lab = small_lab();
        let g = lab.second_moment().clone();
        let r0 = &g * 2.0;
        let horizon = std::f64::consts::LN_2;
        let traj = lab
            .integrate(&dvector![1.0, 0.0], &r0, horizon, 0.01)
            .unwrap();
        let max_err = traj
            .points
            .iter()
            .map(|p| p.r_closed_form_err)
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-6, "max closed-form error {max_err}");
        assert!((traj.final_r - &g * 1.5).norm() < 1e-6);
    }

    #[test]
    fn truth_start_stays_near_truth() {
        let lab = small_lab();
        let truth = dvector![2.0, -1.0];
        let traj = lab
            .integrate(&truth, &lab.second_moment().clone(), 5.0, 0.01)
            .unwrap();
        assert!((traj.final_beta() - &truth).norm() < 0.05);
    }

    #[test]
    fn both_half_spaces_flow_to_their_own_sign() {
        let lab = small_lab();
        let truth = dvector![2.0, -1.0];
        let r0 = lab.second_moment().clone();
        let plus = lab
            .integrate(&dvector![0.5, 0.5], &r0, 25.0, 0.01)
            .unwrap();
        assert!(
            (plus.final_beta() - &truth).norm() < 0.02,
            "plus endpoint {}",
            plus.final_beta()
        );
        let minus = lab
            .integrate(&dvector![-0.5, -0.5], &r0, 25.0, 0.01)
            .unwrap();
        assert!(
            (minus.final_beta() + &truth).norm() < 0.02,
            "minus endpoint {}",
            minus.final_beta()
        );
        let settled: Vec<_> = plus.points.iter().filter(|p| p.t >= 5.0).collect();
        for w in settled.windows(2) {
            assert!(
                w[1].v <= w[0].v + 1e-6,
                "V rose from {} to {} at t = {}",
                w[0].v,
                w[1].v,
                w[1].t
            );
        }
    }

    #[test]
    fn lyapunov_arithmetic_and_reference_alignment() {
        let r = DMatrix::identity(2, 2);
        assert_eq!(lyapunov(&dvector![3.0, 4.0], &r, &dvector![0.0, 0.0]), 12.5);
        assert_eq!(lyapunov(&dvector![1.0, 1.0], &r, &dvector![1.0, 1.0]), 0.0);
        let star = dvector![2.0, -1.0];
        assert_eq!(aligned_reference(&dvector![1.0, 0.0], &star), star);
        assert_eq!(aligned_reference(&dvector![-1.0, 0.0], &star), -&star);
        assert_eq!(
            aligned_reference(&dvector![1.0, 2.0], &star),
            DVector::zeros(2)
        );
    }

    #[test]
    fn lemma3_identity_holds_across_mixing_weights() {
        for &a in &[0.0, 1.0, 5.0] {
            for &sigma in &[0.1, 1.0] {
                for &p in &[0.3, 0.5] {
                    let v = lemma3_oracle(a, sigma, p).unwrap();
                    assert!(
                        (v - a).abs() < 1e-6,
                        "a = {a}, sigma = {sigma}, p = {p}: got {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn lemma5_values_match_independent_references() {
        let cases = [
            (1.0, 1.0, 5.0132565492620005),
            (1.0, 2.0, 9.615559781580508),
            (0.1, 0.5, 0.6192087706881543),
            (10.0, 4.0, 20.053091571745533),
        ];
        for (c, x, expected) in cases {
            let v = lemma5_value(c, x, 1.0).unwrap();
            assert!(
                (v - expected).abs() < 1e-8,
                "F({c}, {x}) = {v}, expected {expected}"
            );
        }
    }

    #[test]
    fn lemma5_monotone_verdict_and_grid_validation() {
        for &c in &[0.1, 1.0, 10.0] {
            let report = lemma5_oracle(c, &[0.5, 1.0, 2.0, 4.0], 1.0).unwrap();
            assert!(report.strictly_increasing, "c = {c}: {:?}", report.values);
        }
        assert!(lemma5_oracle(1.0, &[1.0, 1.0], 1.0).is_err());
        assert!(lemma5_oracle(1.0, &[], 1.0).is_err());
        assert!(lemma5_oracle(1.0, &[-1.0, 1.0], 1.0).is_err());
    }
}
