//! Streaming estimator for the general two-component mixture
//! y = β₁ᵀφ + w or y = β₂ᵀφ + w.
//!
//! The pair is reparametrized as the centroid θ₁ = (β₁+β₂)/2 and the
//! half-gap θ₂ = (β₁−β₂)/2. The centroid follows a plain recursive
//! least-squares update; the half-gap follows the symmetric-mixture
//! update driven by the centered innovation. Both share one gain matrix.
//! Estimates converge to (β₁, β₂) or the swapped pair, so errors are
//! measured under the better truth assignment.

use nalgebra::{DMatrix, DVector};

use crate::datagen::ModelSpec;
use crate::error::{Error, Result};
use crate::tanh_scaled;

/// Which centroid iterate defines the innovation m = y − θ₁ᵀφ handed to
/// the half-gap update within one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualTiming {
    /// θ₁ as it stood before its own update in the same step.
    #[default]
    PreUpdate,
    /// θ₁ after its update in the same step.
    PostUpdate,
}

/// Recursive general-mixture estimator.
#[derive(Debug, Clone)]
pub struct AsymEm {
    theta1: DVector<f64>,
    theta2: DVector<f64>,
    p: DMatrix<f64>,
    sigma2: f64,
}

impl AsymEm {
    /// A zero half-gap initialization collapses both branches onto the
    /// centroid and is a stationary set of the update, so it is rejected.
    pub fn new(
        theta1_0: DVector<f64>,
        theta2_0: DVector<f64>,
        p0: DMatrix<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        let sym = crate::sym_em::SymEm::new(theta2_0.clone(), p0, sigma2)?;
        if theta1_0.len() != theta2_0.len() {
            return Err(Error::DimensionMismatch {
                expected: theta2_0.len(),
                got: theta1_0.len(),
            });
        }
        if theta1_0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("initial centroid must be finite".into()));
        }
        Ok(Self {
            theta1: theta1_0,
            theta2: theta2_0,
            p: sym.gain_matrix().clone(),
            sigma2,
        })
    }

    /// Builds the estimator from initial guesses of the two regression
    /// vectors via θ₁ = (β₁+β₂)/2, θ₂ = (β₁−β₂)/2.
    pub fn from_branch_guesses(
        beta1_0: &DVector<f64>,
        beta2_0: &DVector<f64>,
        p0: DMatrix<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        Self::new(
            (beta1_0 + beta2_0) * 0.5,
            (beta1_0 - beta2_0) * 0.5,
            p0,
            sigma2,
        )
    }

    pub fn dim(&self) -> usize {
        self.theta1.len()
    }

    pub fn theta1(&self) -> &DVector<f64> {
        &self.theta1
    }

    pub fn theta2(&self) -> &DVector<f64> {
        &self.theta2
    }

    pub fn gain_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// First branch estimate β̂₁ = θ₁ + θ₂.
    pub fn beta1(&self) -> DVector<f64> {
        &self.theta1 + &self.theta2
    }

    /// Second branch estimate β̂₂ = θ₁ − θ₂.
    pub fn beta2(&self) -> DVector<f64> {
        &self.theta1 - &self.theta2
    }

    /// Absorbs one observation and returns the centroid innovation
    /// m = y − θ₁ᵀφ it used. The innovation is taken at the pre-update
    /// centroid and feeds both parameter updates.
    pub fn step(&mut self, phi: &DVector<f64>, y: f64) -> Result<f64> {
        self.step_with_timing(phi, y, ResidualTiming::PreUpdate)
    }

    /// Like `step`, but lets the caller pick which centroid iterate
    /// defines the innovation fed to the spread update. `PreUpdate` is
    /// the estimator's own definition; `PostUpdate` recomputes the
    /// innovation after the centroid moves.
    pub fn step_with_timing(
        &mut self,
        phi: &DVector<f64>,
        y: f64,
        timing: ResidualTiming,
    ) -> Result<f64> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: phi.len(),
            });
        }
        let pphi = &self.p * phi;
        let a = 1.0 / (1.0 + phi.dot(&pphi));
        let e1 = y - self.theta1.dot(phi);
        let gap = self.theta2.dot(phi);
        self.theta1.axpy(a * e1, &pphi, 1.0);
        let m = match timing {
            ResidualTiming::PreUpdate => e1,
            ResidualTiming::PostUpdate => y - self.theta1.dot(phi),
        };
        let gap_target = m * tanh_scaled(gap * m, self.sigma2);
        self.theta2.axpy(a * (gap_target - gap), &pphi, 1.0);
        self.p.ger(-a, &pphi, &pphi, 1.0);
        Ok(m)
    }

    /// Nearest-truth alignment: each branch estimate is matched to the
    /// closer of the two true vectors. Returns the two residual norms
    /// and the matched truth indices, ties going to the first truth.
    pub fn align_error(&self, model: &ModelSpec) -> AlignedErrors {
        align_pair(&self.beta1(), &self.beta2(), model.beta1(), model.beta2())
    }
}

/// Residual norms of a branch-estimate pair under nearest-truth
/// assignment, together with the assignment itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedErrors {
    pub err1: f64,
    pub err2: f64,
    pub assignment: (usize, usize),
}

impl AlignedErrors {
    /// Largest of the two errors relative to the larger truth norm, the
    /// scale-free convergence measure used by the experiments.
    pub fn max_relative(&self, model: &ModelSpec) -> f64 {
        let scale = model.beta1().norm().max(model.beta2().norm());
        self.err1.max(self.err2) / scale
    }
}

/// Matches (estimate1, estimate2) against (truth1, truth2) by nearest
/// truth per estimate, ties toward the first truth.
pub fn align_pair(
    est1: &DVector<f64>,
    est2: &DVector<f64>,
    truth1: &DVector<f64>,
    truth2: &DVector<f64>,
) -> AlignedErrors {
    let assign = |est: &DVector<f64>| -> (f64, usize) {
        let d1 = (est - truth1).norm();
        let d2 = (est - truth2).norm();
        if d2 < d1 {
            (d2, 2)
        } else {
            (d1, 1)
        }
    };
    let (err1, a1) = assign(est1);
    let (err2, a2) = assign(est2);
    AlignedErrors {
        err1,
        err2,
        assignment: (a1, a2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{MlrStream, ModelSpec, RegressorProcess};
    use nalgebra::dvector;

    fn iid_unit(d: usize) -> RegressorProcess {
        RegressorProcess::IidGaussian {
            covariance: DMatrix::identity(d, d),
        }
    }

    #[test]
    fn construction_rejects_zero_half_gap_and_mismatches() {
        assert!(AsymEm::new(
            dvector![1.0, 1.0],
            dvector![0.0, 0.0],
            DMatrix::identity(2, 2),
            1.0
        )
        .is_err());
        assert!(AsymEm::new(
            dvector![1.0],
            dvector![1.0, 1.0],
            DMatrix::identity(2, 2),
            1.0
        )
        .is_err());
        assert!(AsymEm::from_branch_guesses(
            &dvector![1.0, 2.0],
            &dvector![1.0, 2.0],
            DMatrix::identity(2, 2),
            1.0
        )
        .is_err());
    }

    #[test]
    fn branch_guesses_round_trip_through_the_reparametrization() {
        let em = AsymEm::from_branch_guesses(
            &dvector![4.0, 6.0],
            &dvector![-2.0, -2.0],
            DMatrix::identity(2, 2),
            1.0,
        )
        .unwrap();
        assert_eq!(em.theta1(), &dvector![1.0, 2.0]);
        assert_eq!(em.theta2(), &dvector![3.0, 4.0]);
        assert_eq!(em.beta1(), dvector![4.0, 6.0]);
        assert_eq!(em.beta2(), dvector![-2.0, -2.0]);
    }

    #[test]
    fn scalar_step_matches_hand_computation() {
        let mut em = AsymEm::new(
            dvector![1.0],
            dvector![1.0],
            DMatrix::identity(1, 1),
            1.0,
        )
        .unwrap();
        let m = em.step(&dvector![1.0], 2.0).unwrap();
        assert_eq!(m, 1.0);
        assert!((em.theta1()[0] - 1.5).abs() < 1e-15);
        assert!((em.theta2()[0] - 0.8807970779778823).abs() < 1e-14);
        assert!((em.gain_matrix()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((em.beta1()[0] - 2.3807970779778823).abs() < 1e-14);
        assert!((em.beta2()[0] - 0.6192029220221177).abs() < 1e-14);
    }

    #[test]
    fn post_update_timing_recomputes_the_innovation() {
        let start = AsymEm::new(
            dvector![0.0],
            dvector![1.0],
            DMatrix::identity(1, 1),
            1.0,
        )
        .unwrap();
        let mut pre = start.clone();
        let mut post = start.clone();
        let m_pre = pre
            .step_with_timing(&dvector![1.0], 2.0, ResidualTiming::PreUpdate)
            .unwrap();
        let m_post = post
            .step_with_timing(&dvector![1.0], 2.0, ResidualTiming::PostUpdate)
            .unwrap();
        assert_eq!(m_pre, 2.0);
        assert_eq!(m_post, 1.0);
        assert_eq!(pre.theta1(), post.theta1());
        assert_eq!(pre.gain_matrix(), post.gain_matrix());
        let expected_post_theta2 = 1.0 + 0.5 * (1.0_f64.tanh() - 1.0);
        assert!((post.theta2()[0] - expected_post_theta2).abs() < 1e-15);
        assert!((pre.theta2()[0] - 1.4640275800758169).abs() < 1e-14);
    }

    #[test]
    fn centroid_path_is_plain_recursive_least_squares() {
        let model =
            ModelSpec::new(dvector![3.0, 1.0], dvector![-2.0, 2.0], 1.0, 0.5).unwrap();
        let mut em = AsymEm::new(
            dvector![0.5, -0.5],
            dvector![1.0, 1.0],
            DMatrix::identity(2, 2) * 2.0,
            1.0,
        )
        .unwrap();
        let mut rls_theta = dvector![0.5, -0.5];
        let mut rls_p = DMatrix::identity(2, 2) * 2.0;
        for obs in MlrStream::new(model, &iid_unit(2), 55, 0).unwrap().take(400) {
            em.step(&obs.phi, obs.y).unwrap();
            let pphi = &rls_p * &obs.phi;
            let a = 1.0 / (1.0 + obs.phi.dot(&pphi));
            let m = obs.y - rls_theta.dot(&obs.phi);
            rls_theta.axpy(a * m, &pphi, 1.0);
            rls_p.ger(-a, &pphi, &pphi, 1.0);
        }
        assert!((em.theta1() - &rls_theta).norm() <= 1e-12);
        assert!((em.gain_matrix() - &rls_p).norm() <= 1e-12);
    }

    #[test]
    fn negating_the_half_gap_swaps_the_branch_estimates() {
        let model =
            ModelSpec::new(dvector![3.0, 1.0], dvector![-2.0, 2.0], 0.5, 0.5).unwrap();
        let p0 = DMatrix::identity(2, 2);
        let mut a = AsymEm::new(dvector![0.2, 0.1], dvector![1.0, -0.5], p0.clone(), 0.5).unwrap();
        let mut b = AsymEm::new(dvector![0.2, 0.1], dvector![-1.0, 0.5], p0, 0.5).unwrap();
        for obs in MlrStream::new(model, &iid_unit(2), 19, 0).unwrap().take(300) {
            a.step(&obs.phi, obs.y).unwrap();
            b.step(&obs.phi, obs.y).unwrap();
            assert_eq!(a.beta1(), b.beta2());
            assert_eq!(a.beta2(), b.beta1());
        }
    }

    #[test]
    fn converges_on_a_well_separated_stream() {
        let model =
            ModelSpec::new(dvector![3.0, 1.0], dvector![-2.0, 2.0], 0.25, 0.5).unwrap();
        let mut em = AsymEm::from_branch_guesses(
            &dvector![1.0, 0.0],
            &dvector![0.0, 1.0],
            DMatrix::identity(2, 2),
            0.25,
        )
        .unwrap();
        for obs in MlrStream::new(model.clone(), &iid_unit(2), 4, 0).unwrap().take(40_000) {
            em.step(&obs.phi, obs.y).unwrap();
        }
        let aligned = em.align_error(&model);
        assert!(
            aligned.max_relative(&model) < 0.05,
            "errors {aligned:?}"
        );
        assert_eq!(aligned.assignment.0 + aligned.assignment.1, 3);
    }

    #[test]
    fn alignment_handles_exact_and_swapped_estimates() {
        let model =
            ModelSpec::new(dvector![1.0, 0.0], dvector![0.0, 1.0], 1.0, 0.5).unwrap();
        let exact = align_pair(
            &dvector![1.0, 0.0],
            &dvector![0.0, 1.0],
            model.beta1(),
            model.beta2(),
        );
        assert_eq!(exact.assignment, (1, 2));
        assert_eq!((exact.err1, exact.err2), (0.0, 0.0));
        let swapped = align_pair(
            &dvector![0.0, 1.0],
            &dvector![1.0, 0.0],
            model.beta1(),
            model.beta2(),
        );
        assert_eq!(swapped.assignment, (2, 1));
        assert_eq!((swapped.err1, swapped.err2), (0.0, 0.0));
        let tied = align_pair(
            &dvector![0.5, 0.5],
            &dvector![0.0, 1.0],
            model.beta1(),
            model.beta2(),
        );
        assert_eq!(tied.assignment.0, 1);
    }
}
