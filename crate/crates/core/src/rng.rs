//! Seed streams.
//!
//! All randomness is derived from a master seed through [`derive_seed`], so a
//! work unit's stream depends only on its key, never on scheduling.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a parent seed and a key path.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Near-balanced random partition of `n` items into `k` groups labelled
/// `0..k`. Group sizes differ by at most one.
pub fn balanced_partition(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut rng_from(seed));
    labels
}

/// Uniform draw in the open interval (0, 1) from 53 random bits.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based exogenous noise: the pair of uniforms for `(unit, node)` is
/// a pure function of the seed, so observational and counterfactual worlds
/// can share noise exactly.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    key: [u8; 32],
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng_from(derive_seed(seed, &[0x6e6f697365]));
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        NoiseStream { key }
    }

    /// Two independent uniforms on (0, 1).
    pub fn uniforms(&self, unit: u64, node: usize) -> (f64, f64) {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(unit);
        rng.set_word_pos(node as u128 * 4);
        (open_unit(rng.next_u64()), open_unit(rng.next_u64()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_is_balanced_and_reproducible() {
        let a = balanced_partition(7, 3, 11);
        let b = balanced_partition(7, 3, 11);
        assert_eq!(a, b);
        let mut counts = [0usize; 3];
        a.iter().for_each(|&l| counts[l] += 1);
        counts.sort();
        assert_eq!(counts, [2, 2, 3]);
    }

    #[test]
    fn noise_is_order_independent() {
        let s = NoiseStream::new(5);
        let late = s.uniforms(9, 3);
        let _ = s.uniforms(1, 0);
        assert_eq!(s.uniforms(9, 3), late);
        assert_ne!(s.uniforms(9, 3), s.uniforms(9, 4));
        assert_ne!(s.uniforms(9, 3), s.uniforms(10, 3));
    }
}
