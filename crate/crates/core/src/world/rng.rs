//! Counter-based deterministic random streams.
//!
//! A stream is keyed by `(seed, label, index)`. Draw `i` of a stream is a pure
//! function of the key and `i`: the SplitMix64 finalizer applied to
//! `key + i * GAMMA`. Only integer arithmetic touches the key and counter, and
//! the float transforms go through `libm`, so draws are bit-identical on every
//! platform.

use crate::geometry::Vec2;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const INDEX_GAMMA: u64 = 0xD1B5_4A32_D192_ED03;

/// Labels of the streams used across the crate. Distinct labels never share
/// draws.
pub mod labels {
    pub const DYNAMICS: &str = "dynamics";
    pub const LAYOUT: &str = "layout";
    pub const SCENARIO: &str = "scenario";
    pub const BASELINE: &str = "baseline";
    pub const POLICY: &str = "policy";
    pub const SHUFFLE: &str = "shuffle";
    pub const INIT: &str = "init";
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, label: &str, index: u64) -> Self {
        let k = mix64(seed ^ mix64(label_hash(label)));
        let key = mix64(k.wrapping_add(index.wrapping_mul(INDEX_GAMMA)));
        Self { key, counter: 0 }
    }

    /// Number of 64-bit draws consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Lemire's multiply-shift; bias is below 2^-64 * n, irrelevant here.
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Standard normal draw (Box-Muller, cosine branch). Consumes two draws.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0, 1] so the logarithm is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform point in the disc of the given radius.
    pub fn in_disc(&mut self, radius: f64) -> Vec2 {
        let r = radius * libm::sqrt(self.uniform());
        let theta = 2.0 * std::f64::consts::PI * self.uniform();
        Vec2::new(r * libm::cos(theta), r * libm::sin(theta))
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
