//! Counter-based random streams: one independent ChaCha stream per
//! `(seed, realization, purpose)`, so results do not depend on the order in
//! which realizations are scheduled.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Purpose {
    Medium = 1,
    WhiteNoise = 2,
    Test = 3,
}

/// Identifies the stream a sample was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub realization: u64,
    pub purpose: Purpose,
}

impl SeedRecord {
    pub fn new(seed: u64, realization: u64, purpose: Purpose) -> Self {
        SeedRecord {
            seed,
            realization,
            purpose,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        assert!(self.realization < 1 << 56, "realization index out of stream range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.realization << 8) | self.purpose as u64);
        rng
    }
}

/// Circular complex normal with `E|ζ|² = 1`.
#[inline]
pub fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
