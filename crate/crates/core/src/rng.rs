//! Counter-based Gaussian generator.
//!
//! A normal variate is addressed by `(seed, stream, counter)`: the seed keys a
//! ChaCha8 block function, the stream selects the ChaCha nonce and the counter
//! selects the word position. Any variate can therefore be regenerated in
//! isolation, in any order, on any thread.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream domains, so that different consumers of the same seed never share
/// variates.
pub mod domain {
    pub const NOISE: u64 = 1 << 40;
    pub const EXACT_OU: u64 = 2 << 40;
    pub const REMAINDER: u64 = 3 << 40;
}

#[derive(Clone)]
pub struct CounterRng {
    key: [u8; 32],
}

impl std::fmt::Debug for CounterRng {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CounterRng").finish_non_exhaustive()
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { key }
    }

    fn positioned(&self, stream: u64, counter: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(stream);
        // two u64 (four 32-bit words) per variate
        rng.set_word_pos(u128::from(counter) * 4);
        rng
    }

    /// Standard normal at `(stream, counter)`.
    pub fn normal(&self, stream: u64, counter: u64) -> f64 {
        let mut rng = self.positioned(stream, counter);
        box_muller(rng.next_u64(), rng.next_u64())
    }

    /// Standard normals at counters `start, start + 1, ...` of `stream`.
    /// Identical to calling [`CounterRng::normal`] for each counter.
    pub fn fill_normals(&self, stream: u64, start: u64, out: &mut [f64]) {
        let mut rng = self.positioned(stream, start);
        for x in out.iter_mut() {
            let a = rng.next_u64();
            let b = rng.next_u64();
            *x = box_muller(a, b);
        }
    }
}

fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(a: u64, b: u64) -> f64 {
    let u1 = open_unit(a);
    let u2 = open_unit(b);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential_fill() {
        let rng = CounterRng::new(7);
        let mut seq = vec![0.0; 37];
        rng.fill_normals(domain::NOISE | 3, 5, &mut seq);
        for (i, &x) in seq.iter().enumerate() {
            assert_eq!(
                x.to_bits(),
                rng.normal(domain::NOISE | 3, 5 + i as u64).to_bits()
            );
        }
    }

    #[test]
    fn streams_and_seeds_are_distinct() {
        let a = CounterRng::new(1).normal(0, 0);
        let b = CounterRng::new(2).normal(0, 0);
        let c = CounterRng::new(1).normal(1, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
