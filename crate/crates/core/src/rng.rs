//! The one pseudo-random generator used everywhere randomness enters the
//! pipeline: splits, synthetic signals, weight init, dropout masks, and
//! epoch shuffles.
//!
//! The algorithm is pinned so that any other implementation can reproduce
//! our streams exactly:
//!
//! * Generator: xoshiro256** (Blackman & Vigna). The 256-bit state is filled
//!   from a `u64` seed by four successive outputs of SplitMix64 started at
//!   `seed`.
//! * `uniform()`: `(next_u64() >> 11) as f64 * 2^-53`, a value in `[0, 1)`.
//! * `below(n)`: `floor(uniform() * n)`.
//! * `normal()`: Box-Muller on two fresh uniforms `u1, u2`:
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`. The sine partner is discarded.
//! * `shuffle`: Fisher-Yates from the top: for `i = n-1 .. 1`,
//!   swap `i` with `below(i + 1)`.
//! * Derived streams: `derive_seed(seed, tags)` folds each tag into the seed
//!   with `s = splitmix64(s ^ splitmix64(tag))`. Streams keyed by
//!   (epoch, sample, layer) never depend on thread scheduling.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(seed, |s, &tag| splitmix64(s ^ splitmix64(tag)))
}

#[derive(Debug, Clone)]
pub struct Prng(Xoshiro256StarStar);

impl Prng {
    pub fn new(seed: u64) -> Self {
        // rand_xoshiro seeds through SplitMix64, as documented above.
        Prng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn derived(seed: u64, tags: &[u64]) -> Self {
        Self::new(derive_seed(seed, tags))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
