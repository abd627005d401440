//! Seeded, splittable random streams.
//!
//! Every random draw in the crate goes through a [`ChainRng`] obtained from a
//! [`SeedStream`]. ChaCha is counter based: a (seed, stream) pair addresses a
//! disjoint keystream, so chains that run in parallel never share randomness
//! and results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type ChainRng = ChaCha8Rng;

/// What a stream is used for. Occupies the top byte of the ChaCha stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Ladder = 1,
    Chain = 2,
    Init = 3,
    Warmstart = 4,
    Oracle = 5,
    Experiment = 6,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStream {
    pub seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn rng(&self, purpose: Purpose, index: u64) -> ChainRng {
        debug_assert!(index < 1 << 56);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((purpose as u64) << 56) | index);
        rng
    }

    /// Independent child seed, e.g. one per trial of a repeated experiment.
    pub fn child(&self, index: u64) -> SeedStream {
        SeedStream {
            seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn fill_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    use rand_distr::{Distribution, StandardNormal};
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub(crate) fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}
