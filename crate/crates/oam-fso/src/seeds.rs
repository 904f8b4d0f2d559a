//! Counter-based seed derivation.
//!
//! All randomness in the crate flows from a single master seed. Child
//! seeds are derived by folding domain tags and counters into a
//! SplitMix64 chain, so any parallel schedule reproduces the sequential
//! ensemble: worker k never shares an RNG stream with worker j.
//!
//! Scheme: `derive(master, &[tag, c0, c1, ...])` feeds each word through
//! `splitmix64(state ^ word)` in order. Tags keep independent consumers
//! (screens, symbol bits, noise, ...) on disjoint streams even when their
//! counters collide.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags for seed derivation. Values are arbitrary but fixed;
/// changing them changes every downstream random number.
pub mod tag {
    /// Per-screen generation within a stack.
    pub const SCREEN: u64 = 0x5343_5245_454e_0001;
    /// Per-realization stack seeds within an ensemble.
    pub const STACK: u64 = 0x5354_4143_4b00_0002;
    /// Information bits in the Monte Carlo harness.
    pub const BITS: u64 = 0x4249_5453_0000_0003;
    /// AWGN noise in the Monte Carlo harness.
    pub const NOISE: u64 = 0x4e4f_4953_4500_0004;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a list of tag/counter words.
pub fn derive(master: u64, words: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &w in words {
        state = splitmix64(state ^ w);
    }
    state
}

/// A deterministic RNG for the given derived seed.
pub fn rng_for(master: u64, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, words))
}

/// Draw a pair of independent standard normal variates (Box-Muller).
///
/// Uses explicit `u64 -> (0,1]` uniforms so the byte stream consumed per
/// draw is fixed across platforms and dependency versions.
pub fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    use rand::RngCore;
    // 53-bit uniforms; u1 in (0,1] so ln(u1) is finite.
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9_007_199_254_740_992.0);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    (r * c, r * s)
}
