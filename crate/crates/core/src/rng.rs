//! Seeded, resumable random streams.
//!
//! A [`Prng`] is a ChaCha8 stream identified by `(seed, stream)`. Independent
//! sub-streams are derived by label (`"init"`, `"noise"`, `"shuffle"`,
//! `"metrics"`, ...) so that consuming one never perturbs another. The word
//! position is exposed so a stream can be checkpointed and resumed exactly.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Prng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl PartialEq for Prng {
    fn eq(&self, other: &Self) -> bool {
        self.state() == other.state()
    }
}

/// Serializable position of a [`Prng`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrngState {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

impl std::fmt::Display for PrngState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.seed, self.stream, self.word_pos)
    }
}

impl std::str::FromStr for PrngState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("malformed rng state {s:?}"));
        let mut parts = s.split(':');
        let seed = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let stream = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let word_pos = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(PrngState {
            seed,
            stream,
            word_pos,
        })
    }
}

// FNV-1a, then a splitmix64 finalizer so nearby labels land far apart.
fn label_hash(label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes().chain(index.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Prng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh sub-stream named by `label`, independent of how much of `self`
    /// has been consumed.
    pub fn derive(&self, label: &str) -> Prng {
        self.derive_indexed(label, 0)
    }

    pub fn derive_indexed(&self, label: &str, index: u64) -> Prng {
        Self::with_stream(self.seed, self.stream ^ label_hash(label, index))
    }

    pub fn state(&self) -> PrngState {
        PrngState {
            seed: self.seed,
            stream: self.stream,
            word_pos: self.inner.get_word_pos(),
        }
    }

    pub fn from_state(state: PrngState) -> Self {
        let mut rng = Self::with_stream(state.seed, state.stream);
        rng.inner.set_word_pos(state.word_pos);
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Fills `out` with standard normals by Box–Muller, consuming two uniforms
    /// per pair of outputs. An odd trailing slot discards the spare normal.
    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_mut(2);
        for pair in &mut chunks {
            // 1 - u lies in (0, 1], keeping ln finite.
            let u1 = 1.0 - self.uniform();
            let u2 = self.uniform();
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = std::f64::consts::TAU * u2;
            pair[0] = radius * angle.cos();
            if let Some(second) = pair.get_mut(1) {
                *second = radius * angle.sin();
            }
        }
    }

    /// Fisher–Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            idx.swap(i, j);
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Prng::new(7);
        let mut b = Prng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derived_streams_differ_and_ignore_parent_position() {
        let mut parent = Prng::new(3);
        let before = parent.derive("noise").next_u64();
        parent.next_u64();
        let after = parent.derive("noise").next_u64();
        assert_eq!(before, after);
        assert_ne!(before, parent.derive("shuffle").next_u64());
        assert_ne!(
            parent.derive_indexed("epoch", 0).next_u64(),
            parent.derive_indexed("epoch", 1).next_u64()
        );
    }

    #[test]
    fn state_round_trips_mid_stream() {
        let mut rng = Prng::new(11).derive("noise");
        for _ in 0..37 {
            rng.next_u64();
        }
        let text = rng.state().to_string();
        let mut resumed = Prng::from_state(text.parse().unwrap());
        for _ in 0..50 {
            assert_eq!(rng.next_u64(), resumed.next_u64());
        }
    }

    #[test]
    fn malformed_state_rejected() {
        assert!("1:2".parse::<PrngState>().is_err());
        assert!("1:2:x".parse::<PrngState>().is_err());
        assert!("1:2:3:4".parse::<PrngState>().is_err());
    }

    #[test]
    fn box_muller_moments() {
        let mut rng = Prng::new(5);
        let mut buf = vec![0.0; 200_000];
        rng.fill_standard_normal(&mut buf);
        let n = buf.len() as f64;
        let mean = buf.iter().sum::<f64>() / n;
        let var = buf.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut rng = Prng::new(1);
        let mut p = rng.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
