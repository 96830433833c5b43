//! Seeded, named random streams.
//!
//! Every stochastic process in a run draws from its own stream, keyed by
//! `(seed, label[, substream])`. A draw is a pure function of the stream key
//! and a counter, so:
//!   * the same key always yields the same sequence, on any platform;
//!   * one process drawing more or fewer samples never perturbs another;
//!   * indexed draws (`bernoulli_at`) let paired experiments give the i-th
//!     packet the same fate regardless of when it was sent.
//!
//! The generator is SplitMix64 applied to `key + (counter+1)·gamma`, which is
//! integer-only and needs no external crate.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Also used elsewhere as a cheap integer mixer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; hashes stream labels into the key.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        Self::with_substream(seed, label, 0)
    }

    /// A stream distinguished by an extra integer, e.g. one loss stream per
    /// (link, direction).
    pub fn with_substream(seed: u64, label: &str, substream: u64) -> Self {
        let key = mix64(seed ^ mix64(fnv1a64(label.as_bytes())) ^ mix64(substream.wrapping_mul(GAMMA)));
        RngStream { key, counter: 0 }
    }

    /// The draw at an absolute position, independent of stream state.
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    /// Uniform in [0, 1) at an absolute position.
    pub fn f64_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli(p) decision for the item at `counter`; pure in (key, counter).
    pub fn bernoulli_at(&self, counter: u64, p: f64) -> bool {
        self.f64_at(counter) < p
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.u64_at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; the open-at-zero form inverse-CDF samplers need.
    pub fn next_open_f64(&mut self) -> f64 {
        1.0 - self.next_f64()
    }
}
