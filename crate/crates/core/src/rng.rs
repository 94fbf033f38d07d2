//! Seedable, splittable random streams.
//!
//! Every stochastic operation takes an explicit [`RandomStream`]. A stream is
//! a ChaCha8 generator keyed by a 64-bit seed; child streams are derived
//! purely from `(seed, tag)` through a SplitMix64 mix, so the same tag always
//! yields the same child regardless of how much the parent has been used.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        RandomStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seed of the child stream with the given tag.
    pub fn child_seed(&self, tag: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x632B_E59B_D9B4_E019)))
    }

    /// Independent child stream; a pure function of this stream's seed and `tag`.
    pub fn child(&self, tag: u64) -> RandomStream {
        RandomStream::from_seed(self.child_seed(tag))
    }

    /// Splits off a new stream, advancing this one.
    pub fn split(&mut self) -> RandomStream {
        let s = self.rng.next_u64();
        RandomStream::from_seed(splitmix64(s))
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot draw an index from an empty range");
        self.rng.random_range(0..n)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_is_independent_of_parent_usage() {
        let a = RandomStream::from_seed(42);
        let mut b = RandomStream::from_seed(42);
        for _ in 0..10 {
            b.next_u64();
        }
        assert_eq!(a.child(3).next_u64(), b.child(3).next_u64());
        assert_ne!(a.child(3).next_u64(), a.child(4).next_u64());
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RandomStream::from_seed(7);
        let mut b = RandomStream::from_seed(7);
        let xs: Vec<u64> = (0..5).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..5).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }
}
