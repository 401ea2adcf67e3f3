//! Portable, seedable random streams.
//!
//! Every stream is xoshiro256++ seeded through SplitMix64
//! (`x += 0x9e3779b97f4a7c15; z = (x ^ x>>30) * 0xbf58476d1ce4e5b9;
//! z = (z ^ z>>27) * 0x94d049bb133111eb; z ^ z>>31`), so a given seed yields
//! the same numbers on every platform. Sub-streams are separated with the
//! xoshiro256 jump polynomial (2^128 draws apart).
//!
//! Uniform reals use the top 53 bits: `u = (x >> 11) · 2⁻⁵³ ∈ [0, 1)`,
//! mapped affinely onto `[lo, hi]`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct Stream {
    inner: Xoshiro256PlusPlus,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// The `index`-th sub-stream of `seed` (index 0 is `Stream::new(seed)`).
    pub fn substream(seed: u64, index: u32) -> Self {
        let mut s = Self::new(seed);
        for _ in 0..index {
            s.inner.jump();
        }
        s
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi]`; returns exactly `lo` when `lo == hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Log-uniform on `[lo, hi]`, both positive.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * self.unit()).exp()
    }

    /// Uniform integer on `[lo, hi]` inclusive.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn vector(&mut self, len: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..len).map(|_| self.uniform(lo, hi)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let a: Vec<u64> = {
            let mut s = Stream::new(8086);
            (0..4).map(|_| s.next_u64()).collect()
        };
        let mut s = Stream::new(8086);
        let b: Vec<u64> = (0..4).map(|_| s.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn substreams_differ() {
        let mut a = Stream::substream(1, 0);
        let mut b = Stream::substream(1, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn unit_interval() {
        let mut s = Stream::new(3);
        for _ in 0..10_000 {
            let u = s.unit();
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(s.uniform(1.0, 1.0), 1.0);
    }
}
