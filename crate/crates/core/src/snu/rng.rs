//! Deterministic random streams standing in for the vacuum-fluctuation QRNG.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{domain, Result};
use crate::stats::inv_norm_cdf;

/// Independent stream purposes. Each (seed, stream, index) triple gets its own ChaCha20 key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Symbols = 1,
    Phase = 2,
    Shot = 3,
    Excess = 4,
    Electronic = 5,
    Delay = 6,
    ReconBits = 7,
    Puncture = 8,
    Privacy = 9,
    CodeGraph = 10,
    Test = 99,
}

/// Counter-based stream keyed by (seed, stream, index).
pub fn stream(seed: u64, which: Stream, index: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(which as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"cvqkd-v1");
    ChaCha20Rng::from_seed(key)
}

#[inline]
fn word_to_open_unit(w: u64) -> f64 {
    ((w >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Map raw uniform words to Gaussian samples of the given variance by inverse CDF.
///
/// The map is monotone in the top 53 bits of each word.
pub fn gaussian_from_uniform(words: &[u64], variance: f64) -> Result<Vec<f64>> {
    if !(variance > 0.0) || !variance.is_finite() {
        return domain(format!("variance must be positive, got {variance}"));
    }
    let s = variance.sqrt();
    Ok(words.iter().map(|&w| s * inv_norm_cdf(word_to_open_unit(w))).collect())
}

/// Standard-normal generator over a ChaCha20 stream.
pub struct Gaussian {
    rng: ChaCha20Rng,
}

impl Gaussian {
    pub fn new(seed: u64, which: Stream, index: u64) -> Self {
        Gaussian { rng: stream(seed, which, index) }
    }

    pub fn from_rng(rng: ChaCha20Rng) -> Self {
        Gaussian { rng }
    }

    #[inline]
    pub fn sample(&mut self) -> f64 {
        inv_norm_cdf(word_to_open_unit(self.rng.next_u64()))
    }

    pub fn uniform(&mut self) -> f64 {
        word_to_open_unit(self.rng.next_u64())
    }

    pub fn fill(&mut self, out: &mut [f64], std: f64) {
        for v in out.iter_mut() {
            *v = std * self.sample();
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn words(seed: u64, n: usize) -> Vec<u64> {
        let mut r = stream(seed, Stream::Test, 0);
        (0..n).map(|_| r.next_u64()).collect()
    }

    #[test]
    fn unit_variance_moment() {
        let g = gaussian_from_uniform(&words(1, 1_000_000), 1.0).unwrap();
        let v = crate::stats::variance(&g);
        assert!((0.995..=1.005).contains(&v), "{v}");
        assert!(crate::stats::mean(&g).abs() < 5.0 / 1000.0);
    }

    #[test]
    fn kolmogorov_smirnov() {
        let mut g = gaussian_from_uniform(&words(2, 20_000), 2.5).unwrap();
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let nd = Normal::new(0.0, 2.5f64.sqrt()).unwrap();
        let n = g.len() as f64;
        let d = g
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = nd.cdf(x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic KS tail: p = 2 exp(−2 n d²); p > 1e-6 means d < sqrt(ln(2e6) / (2n)).
        let p = 2.0 * (-2.0 * n * d * d).exp();
        assert!(p > 1e-6, "d={d} p={p}");
    }

    #[test]
    fn empty_and_domain() {
        assert!(gaussian_from_uniform(&[], 1.0).unwrap().is_empty());
        assert!(gaussian_from_uniform(&[1, 2], 0.0).is_err());
        assert!(gaussian_from_uniform(&[1, 2], -1.0).is_err());
    }

    #[test]
    fn reproducible_and_distinct() {
        let a = gaussian_from_uniform(&words(5, 1000), 1.0).unwrap();
        let b = gaussian_from_uniform(&words(5, 1000), 1.0).unwrap();
        let c = gaussian_from_uniform(&words(6, 1000), 1.0).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a != c);
        let mut s1 = Gaussian::new(3, Stream::Shot, 0);
        let mut s2 = Gaussian::new(3, Stream::Shot, 1);
        assert_ne!(s1.sample(), s2.sample());
    }

    #[test]
    fn monotone_in_words() {
        let mut w = words(7, 500);
        w.sort_unstable();
        let g = gaussian_from_uniform(&w, 1.0).unwrap();
        assert!(g.windows(2).all(|p| p[0] <= p[1]));
    }
}
