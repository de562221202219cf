//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha` 0.3). Splitting rule:
//!
//! * run seed = `splitmix64(master_seed + (run_index + 1) * 0x9E37_79B9_7F4A_7C15)`
//! * a run's streams share the ChaCha key `seed_from_u64(run_seed)` and differ
//!   in the ChaCha stream id ([`StreamKind`]), so the user simulation and the
//!   adversary never draw from the same sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recorded in run manifests.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.3); key = seed_from_u64(splitmix64(master + (i+1)*0x9E3779B97F4A7C15)); stream id 0 = environment, 1 = adversary";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_index` under `master_seed`.
pub fn run_seed(master_seed: u64, run_index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add((run_index.wrapping_add(1)).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// True user behaviour.
    Environment = 0,
    /// Adversarial examination draws.
    Adversary = 1,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, kind: StreamKind) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(kind as u64);
        Self { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// One Bernoulli(`p`) draw. `p` must lie in `[0, 1]`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
