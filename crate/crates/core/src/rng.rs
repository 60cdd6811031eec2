//! Deterministic random streams.
//!
//! Every stochastic decision draws from a stream keyed by
//! (master seed, frame, pixel, purpose), so a frame replays bit-identically
//! regardless of how work is split across threads.

use rand::SeedableRng;

pub type Rng = rand_pcg::Pcg64Mcg;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    LightSample = 1,
    EnvironmentSample = 2,
    ProbeRays = 3,
    CacheResolve = 4,
    Glossy = 5,
    Oracle = 6,
    Grid = 7,
}

pub fn stream(seed: u64, frame: u64, pixel: u64, purpose: Purpose) -> Rng {
    let mut h = mix64(seed);
    h = mix64(h ^ frame);
    h = mix64(h ^ pixel.wrapping_mul(0x2545_f491_4f6c_dd1d));
    h = mix64(h ^ purpose as u64);
    Rng::seed_from_u64(h)
}

/// Convenience for tests and tools that need a plain seeded generator.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(mix64(seed))
}
