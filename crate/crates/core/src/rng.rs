//! Deterministic random substreams.
//!
//! Every Monte Carlo draw in the crate comes from a ChaCha8 generator keyed by
//! the caller's seed plus a path of indices (grid point, block, ...), so
//! results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{UnitVector3, Vector3};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed);
    for &k in keys {
        state = splitmix64(state ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(state)
}

/// Uniform direction on the unit sphere.
pub fn uniform_direction<R: Rng>(rng: &mut R) -> UnitVector3 {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    let (sp, cp) = phi.sin_cos();
    UnitVector3::from_vector(Vector3::new(s * cp, s * sp, z)).unwrap_or(UnitVector3::Z)
}

/// Uniform angle in [0, 2π).
pub fn uniform_angle<R: Rng>(rng: &mut R) -> f64 {
    2.0 * std::f64::consts::PI * rng.random::<f64>()
}

/// Streaming mean and variance that merge deterministically.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunningStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: RunningStats) -> RunningStats {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        RunningStats { n, mean, m2 }
    }

    /// Sample standard deviation over sqrt(n).
    pub fn standard_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
    }
}
