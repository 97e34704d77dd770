//! Deterministic random number generation.
//!
//! Every randomized procedure in this crate draws from a ChaCha8 stream
//! (the `rand_chacha` implementation, whose output is specified and stable
//! across platforms and crate versions) seeded from a 64-bit value. Derived
//! streams use [`mix`] (splitmix64 finalization over seed and tag) so that
//! sub-procedures get independent, reproducible streams.
//!
//! Floating-point sampling is defined here rather than taken from a
//! distributions crate so the exact bit-level procedure is documented and
//! portable to other languages:
//! - [`uniform_f64`]: the top 53 bits of one `u64` scaled by 2^-53,
//! - [`normal`]: one Box-Muller cosine transform per call (two uniforms in,
//!   one normal out; the sine counterpart is discarded),
//! - [`index`]: rejection-sampled unbiased integer in `[0, bound)`,
//! - [`sample_indices`]: partial Fisher-Yates over `0..n`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// splitmix64 finalizer; mixes a seed with a domain tag.
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha8 stream for the given seed and domain tag.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag))
}

/// Uniform in `[0, 1)` with 53 bits of precision.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via the Box-Muller cosine branch.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1 = 1.0 - uniform_f64(rng);
    let u2 = uniform_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Unbiased integer in `[0, bound)`.
pub fn index(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    assert!(bound > 0, "index bound must be positive");
    let b = bound as u64;
    // Reject draws from the tail region that would bias the modulus.
    let limit = u64::MAX - u64::MAX % b;
    loop {
        let v = rng.next_u64();
        if v < limit {
            return (v % b) as usize;
        }
    }
}

/// The first `k` entries of a Fisher-Yates shuffle of `0..n`, i.e. a uniform
/// sample of `k` distinct indices in draw order.
pub fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot sample {k} of {n} without replacement");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + index(rng, n - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
