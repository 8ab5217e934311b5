//! Counter-keyed random streams. A stream is a pure function of
//! `(seed, replication, stream)`, so parallel scheduling cannot change
//! results.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::special::normal_quantile;

/// Streams used within one replication.
pub(crate) mod stream {
    pub const NULL_SUBSET: u64 = 0;
    pub const SAMPLE_FIRST: u64 = 1;
    pub const SAMPLE_SECOND: u64 = 2;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for one `(seed, replication, stream)` key.
#[derive(Debug, Clone)]
pub struct StreamRng(ChaCha8Rng);

impl StreamRng {
    pub fn new(seed: u64, replication: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        let mut h = splitmix(seed);
        for (i, word) in [seed, replication, stream, 0x6f74_7261_6e6b].into_iter().enumerate() {
            h = splitmix(h ^ word);
            key[i * 8..(i + 1) * 8].copy_from_slice(&h.to_le_bytes());
        }
        StreamRng(ChaCha8Rng::from_seed(key))
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by inversion.
    pub fn normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| StreamRng::new(1, 2, 3).0.next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut x = StreamRng::new(1, 2, 3);
        let mut y = StreamRng::new(1, 3, 3);
        let mut z = StreamRng::new(1, 2, 4);
        let (u, v, w) = (x.uniform(), y.uniform(), z.uniform());
        assert!(u != v && u != w && v != w);
    }

    #[test]
    fn uniforms_are_open_and_centered() {
        let mut r = StreamRng::new(9, 0, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| r.uniform()).collect();
        assert!(draws.iter().all(|&u| u > 0.0 && u < 1.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.5).abs() < 0.005);
    }
}
