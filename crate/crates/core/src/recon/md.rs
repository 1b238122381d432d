//! Multidimensional reconciliation maps over the normed division algebras (reals, complex, quaternions, octonions).

use crate::error::{domain, Result};

pub const DIMS: [usize; 4] = [1, 2, 4, 8];

fn check_dim(d: usize) -> Result<()> {
    if DIMS.contains(&d) {
        Ok(())
    } else {
        domain(format!("MD dimension {d} not in {{1, 2, 4, 8}}"))
    }
}

fn conj(a: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = a.iter().map(|v| -v).collect();
    c[0] = a[0];
    c
}

/// Cayley–Dickson product: (a, b)(c, d) = (ac − d*b, da + bc*).
pub fn cd_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert_eq!(n, y.len());
    if n == 1 {
        return vec![x[0] * y[0]];
    }
    let h = n / 2;
    let (a, b) = x.split_at(h);
    let (c, d) = y.split_at(h);
    let ac = cd_mul(a, c);
    let dsb = cd_mul(&conj(d), b);
    let da = cd_mul(d, a);
    let bcs = cd_mul(b, &conj(c));
    let mut out = Vec::with_capacity(n);
    out.extend(ac.iter().zip(&dsb).map(|(p, q)| p - q));
    out.extend(da.iter().zip(&bcs).map(|(p, q)| p + q));
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Mapping m with M(m)·(y/|y|) = s, where M(m) is left multiplication by m. |m| = |s|.
pub fn md_map(y: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    check_dim(y.len())?;
    if s.len() != y.len() {
        return domain("MD map needs y and s of equal dimension");
    }
    let ny = norm(y);
    if !(ny > 0.0) {
        return domain("MD map of a zero-norm vector");
    }
    let u: Vec<f64> = y.iter().map(|v| v / ny).collect();
    Ok(cd_mul(s, &conj(&u)))
}

/// M(m)·v.
pub fn md_apply(m: &[f64], v: &[f64]) -> Vec<f64> {
    cd_mul(m, v)
}

/// Matrix of M(m), row-major d×d.
pub fn md_matrix(m: &[f64]) -> Vec<f64> {
    let d = m.len();
    let mut out = vec![0.0; d * d];
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        for (i, v) in cd_mul(m, &e).into_iter().enumerate() {
            out[i * d + j] = v;
        }
    }
    out
}

/// Largest LLR magnitude handed to the decoder.
pub const LLR_CLAMP: f64 = 50.0;

/// Per-bit LLRs (positive favours bit 0, i.e. s_i = +1/√d) for Bob's spins given Alice's x and the disclosed m.
///
/// `x` is scaled to unit variance per dimension and Bob's data is modelled as y = x + z, z ~ N(0, noise_var).
pub fn md_demap(x: &[f64], m: &[f64], noise_var: f64) -> Vec<f64> {
    let d = x.len() as f64;
    let w = md_apply(m, x);
    if !(noise_var > 0.0) {
        return w.iter().map(|v| LLR_CLAMP * v.signum()).collect();
    }
    // x = c·y + n with n independent of y; |y| replaced by its conditional rms given x.
    let c = 1.0 / (1.0 + noise_var);
    let sn2 = noise_var / (1.0 + noise_var);
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let amp = c * (x2 + d * noise_var).sqrt() / d.sqrt();
    w.iter().map(|v| (2.0 * amp * v / sn2).clamp(-LLR_CLAMP, LLR_CLAMP)).collect()
}

/// Spin vector for d key bits: bit 0 → +1/√d, bit 1 → −1/√d.
pub fn spins(bits: &[u8]) -> Vec<f64> {
    let a = 1.0 / (bits.len() as f64).sqrt();
    bits.iter().map(|&b| if b == 0 { a } else { -a }).collect()
}

/// Capacity of the binary-input AWGN channel at the given SNR, by Simpson integration.
pub fn biawgn_capacity(snr: f64) -> f64 {
    if !(snr > 0.0) {
        return 0.0;
    }
    // LLR ~ N(2·snr, 4·snr) given bit 0; C = 1 − E[log2(1 + e^{−L})].
    let mu = 2.0 * snr;
    let sd = (4.0 * snr).sqrt();
    let m = 4000;
    let lo = mu - 12.0 * sd;
    let h = 24.0 * sd / m as f64;
    let f = |l: f64| {
        let z = (l - mu) / sd;
        let p = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let loss = if l > 0.0 { (-l).exp().ln_1p() } else { -l + l.exp().ln_1p() };
        p * loss / std::f64::consts::LN_2
    };
    let mut acc = f(lo) + f(lo + m as f64 * h);
    for i in 1..m {
        acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - acc * h / 3.0
}

/// Low-SNR gain of the d-dimensional virtual channel: (E|y|)²/E|y|², i.e. 2Γ((d+1)/2)²/(d·Γ(d/2)²).
pub fn md_snr_factor(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0 / PI,
        2 => PI / 4.0,
        4 => 9.0 * PI / 32.0,
        8 => 22050.0 * PI / 73728.0,
        _ => f64::NAN,
    }
}

/// Capacity per dimension of the MD virtual channel: a binary-input AWGN channel at the reduced SNR.
pub fn md_virtual_capacity(snr: f64, d: usize) -> f64 {
    biawgn_capacity(md_snr_factor(d) * snr)
}

/// Shannon capacity per real dimension, ½·log2(1 + SNR).
pub fn gaussian_capacity(snr: f64) -> f64 {
    0.5 * (1.0 + snr.max(0.0)).log2()
}
