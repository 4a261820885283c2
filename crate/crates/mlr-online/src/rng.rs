//! Deterministic RNG stream derivation.
//!
//! Every random quantity in the crate draws from a ChaCha12 generator
//! whose (seed, stream) pair is derived from a root seed, a replication
//! index, and the role the stream plays. Distinct roles never share a
//! stream, so adding draws to one consumer cannot perturb another, and
//! replications are independent by construction.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Role a derived RNG stream plays within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Hidden component labels of the data stream.
    Labels,
    /// Regressor process innovations.
    Innovations,
    /// Observation noise.
    Noise,
    /// Randomized initial conditions (estimator or regressor state).
    Init,
    /// Monte Carlo draws for bound evaluation.
    BoundsMc,
    /// The frozen sample bank behind mean-field ODE field evaluations.
    OdeBank,
    /// Estimator starting points drawn by an initialization policy.
    PolicyInit,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Labels => 0,
            StreamKind::Innovations => 1,
            StreamKind::Noise => 2,
            StreamKind::Init => 3,
            StreamKind::BoundsMc => 4,
            StreamKind::OdeBank => 5,
            StreamKind::PolicyInit => 6,
        }
    }
}

/// Number of stream slots reserved per replication.
const STREAMS_PER_REPLICATION: u64 = 8;

/// Derives the generator for `kind` within replication `replication` of a
/// run rooted at `seed`.
pub fn derive(seed: u64, kind: StreamKind, replication: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(
        replication
            .wrapping_mul(STREAMS_PER_REPLICATION)
            .wrapping_add(kind.tag()),
    );
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn first_draws(rng: &mut ChaCha12Rng, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn same_coordinates_reproduce_the_same_stream() {
        let a = first_draws(&mut derive(7, StreamKind::Noise, 3), 8);
        let b = first_draws(&mut derive(7, StreamKind::Noise, 3), 8);
        assert_eq!(a, b);
    }

    #[test]
    fn kinds_and_replications_are_distinct_streams() {
        let base = first_draws(&mut derive(7, StreamKind::Labels, 0), 8);
        assert_ne!(base, first_draws(&mut derive(7, StreamKind::Noise, 0), 8));
        assert_ne!(base, first_draws(&mut derive(7, StreamKind::Labels, 1), 8));
        assert_ne!(base, first_draws(&mut derive(8, StreamKind::Labels, 0), 8));
    }
}
