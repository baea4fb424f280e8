//! Deterministic random streams.
//!
//! A run starts from one 64-bit seed; every component draws from a named
//! substream derived by hashing the parent identity with a label. ChaCha8 is
//! portable, so a `(seed, stream)` pair yields the same draws on every
//! platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A seeded, single-owner random stream.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Derives an independent substream. Depends only on the parent's
    /// `(seed, stream)` identity and `label`, never on how many draws the
    /// parent has already made.
    pub fn split(&self, label: &str) -> SeededRng {
        split_rng(self, label)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Inverse-CDF draw from a probability vector.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding left u above the cumulative sum; pick the last non-zero bin.
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Returns the substream of `parent` named `label`.
pub fn split_rng(parent: &SeededRng, label: &str) -> SeededRng {
    let mut hasher = Sha256::new();
    hasher.update(parent.seed.to_le_bytes());
    hasher.update(parent.stream.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 8];
    let mut stream = [0u8; 8];
    seed.copy_from_slice(&digest[0..8]);
    stream.copy_from_slice(&digest[8..16]);
    SeededRng::with_stream(u64::from_le_bytes(seed), u64::from_le_bytes(stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(rng: &mut SeededRng, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.next_u64()).collect()
    }

    #[test]
    fn same_label_same_stream() {
        let root = SeededRng::new(7);
        let a = draws(&mut split_rng(&root, "env"), 100);
        let b = draws(&mut split_rng(&root, "env"), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn labels_and_seeds_separate_streams() {
        let root7 = SeededRng::new(7);
        let root8 = SeededRng::new(8);
        let env7 = draws(&mut split_rng(&root7, "env"), 100);
        let pol7 = draws(&mut split_rng(&root7, "policy"), 100);
        let env8 = draws(&mut split_rng(&root8, "env"), 100);
        assert!(env7.iter().zip(&pol7).all(|(a, b)| a != b));
        assert!(env7.iter().zip(&env8).all(|(a, b)| a != b));
    }

    #[test]
    fn split_ignores_parent_consumption() {
        let mut root = SeededRng::new(3);
        let before = draws(&mut root.split("x"), 10);
        let _ = draws(&mut root, 50);
        let after = draws(&mut root.split("x"), 10);
        assert_eq!(before, after);
    }

    #[test]
    fn categorical_respects_zero_mass() {
        let mut rng = SeededRng::new(1);
        for _ in 0..1000 {
            assert_eq!(rng.categorical(&[0.0, 1.0, 0.0]), 1);
        }
    }
}
