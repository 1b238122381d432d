//! Toeplitz hashing over GF(2).

use num_complex::Complex64;

use crate::dsp;
use crate::error::{domain, Result};

/// y = T·x over GF(2), T[i][j] = seed[i − j + n − 1] for an out_len × n matrix.
///
/// Computed as one FFT convolution of the 0/1 sequences followed by reduction mod 2.
pub fn toeplitz_extract(bits: &[u8], seed_bits: &[u8], out_len: usize) -> Result<Vec<u8>> {
    let n = bits.len();
    if out_len > n {
        return domain(format!("output length {out_len} exceeds input length {n}"));
    }
    if seed_bits.len() != n + out_len - 1 || n == 0 {
        return domain(format!("seed must hold {} bits, got {}", n + out_len - 1, seed_bits.len()));
    }
    if out_len == 0 {
        return Ok(Vec::new());
    }
    if (n as f64) * (out_len as f64) < 4e6 {
        return Ok(naive(bits, seed_bits, out_len));
    }
    // conv[k] = Σ_j seed[k − j]·x[j]; y_i = conv[i + n − 1].
    let len = (seed_bits.len() + n - 1).next_power_of_two();
    let mut a = vec![Complex64::new(0.0, 0.0); len];
    let mut b = vec![Complex64::new(0.0, 0.0); len];
    for (z, &s) in a.iter_mut().zip(seed_bits) {
        z.re = s as f64;
    }
    for (z, &x) in b.iter_mut().zip(bits) {
        z.re = x as f64;
    }
    dsp::fft(&mut a);
    dsp::fft(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    dsp::ifft(&mut a);
    Ok((0..out_len).map(|i| (a[i + n - 1].re.round() as i64 & 1) as u8).collect())
}

fn naive(bits: &[u8], seed: &[u8], out_len: usize) -> Vec<u8> {
    let n = bits.len();
    (0..out_len)
        .map(|i| (0..n).fold(0u8, |acc, j| acc ^ (seed[i + n - 1 - j] & bits[j])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snu::rng::{Gaussian, Stream};

    fn rbits(g: &mut Gaussian, n: usize) -> Vec<u8> {
        (0..n).map(|_| (g.uniform() < 0.5) as u8).collect()
    }

    /// Explicit matrix, written out entry by entry.
    fn matrix_oracle(x: &[u8], seed: &[u8], m: usize) -> Vec<u8> {
        let n = x.len();
        let mut t = vec![vec![0u8; n]; m];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                // first column top to bottom is seed[n-1..], first row right to left is seed[..n]
                *e = seed[n - 1 + i - j];
            }
        }
        t.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum::<u8>() % 2).collect()
    }

    #[test]
    fn hand_example() {
        // 3×5 matrix from seed s0..s6: row0 = s4 s3 s2 s1 s0.
        let seed = [1, 0, 1, 1, 0, 0, 1];
        let x = [1, 1, 0, 1, 0];
        // row0 = [0,1,1,0,1]·x = 0+1+0+0+0 = 1; row1 = [0,0,1,1,0]·x = 0+0+0+1 = 1; row2 = [1,0,0,1,1]·x = 1+0+0+1 = 0
        assert_eq!(toeplitz_extract(&x, &seed, 3).unwrap(), vec![1, 1, 0]);
    }

    #[test]
    fn identity_diagonal_gives_prefix() {
        let n = 20;
        let m = 7;
        let mut seed = vec![0u8; n + m - 1];
        seed[n - 1] = 1;
        let x: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        assert_eq!(toeplitz_extract(&x, &seed, m).unwrap(), x[..m].to_vec());
    }

    #[test]
    fn matches_matrix_oracle() {
        let mut g = Gaussian::new(1, Stream::Test, 0);
        for _ in 0..100 {
            let n = 1 + (g.uniform() * 40.0) as usize;
            let m = 1 + (g.uniform() * n as f64) as usize % n;
            let x = rbits(&mut g, n);
            let s = rbits(&mut g, n + m - 1);
            assert_eq!(toeplitz_extract(&x, &s, m).unwrap(), matrix_oracle(&x, &s, m));
        }
    }

    #[test]
    fn fft_path_matches_naive() {
        let mut g = Gaussian::new(2, Stream::Test, 0);
        let (n, m) = (5000, 3000);
        let x = rbits(&mut g, n);
        let s = rbits(&mut g, n + m - 1);
        assert_eq!(toeplitz_extract(&x, &s, m).unwrap(), naive(&x, &s, m));
    }

    #[test]
    fn linear_over_gf2() {
        let mut g = Gaussian::new(3, Stream::Test, 0);
        let (n, m) = (3000, 2000);
        let a = rbits(&mut g, n);
        let b = rbits(&mut g, n);
        let s = rbits(&mut g, n + m - 1);
        let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ta = toeplitz_extract(&a, &s, m).unwrap();
        let tb = toeplitz_extract(&b, &s, m).unwrap();
        let tab = toeplitz_extract(&ab, &s, m).unwrap();
        assert!(tab.iter().zip(ta.iter().zip(&tb)).all(|(z, (x, y))| *z == x ^ y));
    }

    #[test]
    fn bad_lengths() {
        assert!(toeplitz_extract(&[1, 0], &[1, 0, 1, 1], 3).is_err());
        assert!(toeplitz_extract(&[1, 0, 1], &[1, 0], 2).is_err());
    }
}
