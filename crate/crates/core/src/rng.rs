//! Seeded random streams.
//!
//! Every random consumer in an experiment draws from its own ChaCha stream
//! derived from one master seed, so that e.g. replaying a dumped observation
//! file regenerates the same arrays and initial weights without touching the
//! channel stream.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Array = 1,
    Channels = 2,
    Anomalies = 3,
    Init = 4,
    SnrLoss = 5,
}

pub fn rng_for(seed: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Sub-stream `index` of a purpose stream (e.g. one per array realization).
pub fn rng_for_indexed(seed: u64, purpose: Purpose, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(((purpose as u64) << 32) | (index & 0xFFFF_FFFF));
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re = normal(rng);
    let im = normal(rng);
    Complex64::new(s * re, s * im)
}
