//! Deterministic, seedable random streams.
//!
//! Every stochastic operation in the crate draws from an [`RngStream`]. A
//! stream is identified by `(seed, stream_id)`; the bits come from ChaCha8
//! keyed by the seed, with `stream_id` selecting the ChaCha stream (nonce).
//! ChaCha is counter based, so two streams with different ids never share a
//! block and each stream has 2^64 blocks of output before it wraps.
//!
//! Sub-streams are derived by hashing a path of labels into a stream id, so
//! the stream used for, say, trial `k` at time `t` depends only on
//! `(seed, k, t)` and never on the order in which trials are executed.
//!
//! Transforms are fixed and must not change, or old result files stop
//! replaying:
//! - normal deviates: Marsaglia polar method, one accepted pair yields one
//!   deviate (the second is discarded so a stream carries no cached state);
//! - gamma deviates: Marsaglia–Tsang squeeze for shape ≥ 1, with the
//!   `U^(1/shape)` boost for shape < 1;
//! - beta deviates: `X / (X + Y)` with `X ~ Gamma(a)`, `Y ~ Gamma(b)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_label(parent: u64, label: u64) -> u64 {
    splitmix64(parent ^ splitmix64(label.wrapping_mul(GOLDEN_GAMMA)))
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&splitmix64(state).to_le_bytes());
    }
    key
}

/// A reproducible stream of random numbers.
///
/// Cloning a stream clones its position: both copies then produce the same
/// sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    core: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut core = ChaCha8Rng::from_seed(key_from_seed(seed));
        core.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            core,
        }
    }

    /// Root stream for a top-level seed.
    pub fn root(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Stream for a path of labels below the root, e.g. `[EXPERIMENT, trial, t]`.
    pub fn from_path(seed: u64, path: &[u64]) -> Self {
        let id = path.iter().fold(0u64, |acc, &label| mix_label(acc, label));
        Self::new(seed, id)
    }

    /// Child stream identified by `label`. Independent of how much of `self`
    /// has been consumed.
    pub fn derive(&self, label: u64) -> Self {
        Self::new(self.seed, mix_label(self.stream_id, label))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::param(format!("uniform range [{lo}, {hi})")));
        }
        Ok(lo + (hi - lo) * self.uniform())
    }

    /// Unbiased integer in `[0, n)`.
    ///
    /// Draws falling in the top `2^64 mod n` values are rejected so the
    /// accepted range is an exact multiple of `n`.
    pub fn uniform_index(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::param("uniform_index needs n >= 1"));
        }
        let n = n as u64;
        let excess = n.wrapping_neg() % n;
        let accept_max = u64::MAX - excess;
        loop {
            let x = self.next_u64();
            if x <= accept_max {
                return Ok((x % n) as usize);
            }
        }
    }

    fn standard_normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s < 1.0 && s > 0.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    /// Normal deviate with mean `mu` and standard deviation `sigma`.
    pub fn gaussian(&mut self, mu: f64, sigma: f64) -> Result<f64> {
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::param(format!(
                "gaussian needs finite mu and sigma >= 0, got mu={mu}, sigma={sigma}"
            )));
        }
        if sigma == 0.0 {
            return Ok(mu);
        }
        Ok(mu + sigma * self.standard_normal())
    }

    fn gamma_unit(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let boost = self.uniform_open().powf(1.0 / shape);
            return self.gamma_unit(shape + 1.0) * boost;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    // (0, 1): avoids ln(0) and 0^(1/shape).
    fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Gamma(shape, 1) deviate.
    pub fn gamma(&mut self, shape: f64) -> Result<f64> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::param(format!("gamma shape must be > 0, got {shape}")));
        }
        Ok(self.gamma_unit(shape))
    }

    /// Beta(a, b) deviate via the gamma ratio.
    pub fn beta(&mut self, a: f64, b: f64) -> Result<f64> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::param(format!("beta needs a, b > 0, got a={a}, b={b}")));
        }
        let x = self.gamma_unit(a);
        let y = self.gamma_unit(b);
        let total = x + y;
        if total == 0.0 {
            // Both underflowed (tiny shapes).
            return Ok(if a >= b { 1.0 } else { 0.0 });
        }
        Ok(x / total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRAWS: usize = 1_000_000;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn degenerate_gaussian() {
        let mut rng = RngStream::root(7);
        assert_eq!(rng.gaussian(5.0, 0.0).unwrap(), 5.0);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        let mut rng = RngStream::root(7);
        assert!(rng.gaussian(0.0, -1.0).is_err());
        assert!(rng.gaussian(0.0, f64::NAN).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = RngStream::root(42);
        let xs: Vec<f64> = (0..DRAWS).map(|_| rng.gaussian(0.0, 1.0).unwrap()).collect();
        let (mean, var) = mean_var(&xs);
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn uniform_index_single_outcome() {
        let mut rng = RngStream::root(1);
        for _ in 0..100 {
            assert_eq!(rng.uniform_index(1).unwrap(), 0);
        }
        assert!(rng.uniform_index(0).is_err());
    }

    #[test]
    fn uniform_index_buckets() {
        let mut rng = RngStream::root(42);
        let mut counts = [0usize; 4];
        for _ in 0..DRAWS {
            counts[rng.uniform_index(4).unwrap()] += 1;
        }
        for c in counts {
            let freq = c as f64 / DRAWS as f64;
            assert!((freq - 0.25).abs() < 0.003, "freq {freq}");
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::from_path(9, &[1, 2, 3]);
        let mut b = RngStream::from_path(9, &[1, 2, 3]);
        let xa: Vec<usize> = (0..1000).map(|_| a.uniform_index(97).unwrap()).collect();
        let xb: Vec<usize> = (0..1000).map(|_| b.uniform_index(97).unwrap()).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn derive_ignores_consumption() {
        let fresh = RngStream::root(3);
        let mut used = RngStream::root(3);
        for _ in 0..17 {
            used.next_u64();
        }
        let mut c1 = fresh.derive(5);
        let mut c2 = used.derive(5);
        assert_eq!(c1.next_u64(), c2.next_u64());
        assert_eq!(fresh.derive(5).stream_id(), RngStream::from_path(3, &[5]).stream_id());
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(0, 1);
        let mut b = RngStream::new(0, 2);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn beta_uniform_mean() {
        let mut rng = RngStream::root(42);
        let xs: Vec<f64> = (0..DRAWS).map(|_| rng.beta(1.0, 1.0).unwrap()).collect();
        let (mean, _) = mean_var(&xs);
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn beta_2_5_mean() {
        let mut rng = RngStream::root(42);
        let xs: Vec<f64> = (0..DRAWS).map(|_| rng.beta(2.0, 5.0).unwrap()).collect();
        let (mean, var) = mean_var(&xs);
        assert!((mean - 2.0 / 7.0).abs() < 0.005, "mean {mean}");
        // a b / ((a+b)^2 (a+b+1)) = 10 / 392
        assert!((var - 10.0 / 392.0).abs() < 0.002, "var {var}");
    }

    #[test]
    fn beta_small_shape_mean() {
        let mut rng = RngStream::root(5);
        let xs: Vec<f64> = (0..200_000).map(|_| rng.beta(0.5, 0.7).unwrap()).collect();
        let (mean, _) = mean_var(&xs);
        assert!((mean - 0.5 / 1.2).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn beta_rejects_nonpositive() {
        let mut rng = RngStream::root(0);
        assert!(rng.beta(0.0, 1.0).is_err());
        assert!(rng.beta(1.0, -2.0).is_err());
    }
}
