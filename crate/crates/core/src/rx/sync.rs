//! Frame timing from the cross-correlation against the public reference.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// Integer part of the delay in samples, in [0, n).
    pub delay_int: usize,
    /// Parabolic refinement in (−0.5, 0.5] samples.
    pub frac: f64,
    /// Estimated standard error of `frac`.
    pub frac_std: f64,
    /// Peak magnitude over the RMS correlation magnitude.
    pub ratio: f64,
}

impl SyncResult {
    pub fn delay(&self, use_frac: bool) -> f64 {
        self.delay_int as f64 + if use_frac { self.frac } else { 0.0 }
    }
}

/// Circular cross-correlation c[l] = Σ_n x[n]·conj(r[n − l]), peak search and parabolic refinement.
pub fn estimate_delay(x: &[Complex64], reference: &[Complex64], min_ratio: f64, frame_id: u64) -> Result<SyncResult> {
    let n = x.len();
    if reference.len() != n || n < 8 {
        return Err(Error::Contract("sync reference must match the frame length".into()));
    }
    let mut a = x.to_vec();
    let mut b = reference.to_vec();
    dsp::fft(&mut a);
    dsp::fft(&mut b);
    // Mean-square bandwidth of the reference, in cycles per sample.
    let eb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    let f2: f64 = b.iter().enumerate().map(|(k, z)| dsp::bin_freq(k, n, 1.0).powi(2) * z.norm_sqr()).sum::<f64>() / eb;
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q.conj();
    }
    dsp::ifft(&mut a);
    let mag: Vec<f64> = a.iter().map(|z| z.norm()).collect();
    let (peak_i, &peak) = mag.iter().enumerate().max_by(|u, v| u.1.total_cmp(v.1)).unwrap();
    let rms = (mag.iter().map(|m| m * m).sum::<f64>() / n as f64).sqrt();
    let ratio = peak / rms;
    if !(ratio >= min_ratio) {
        return Err(Error::Sync { frame_id, ratio });
    }
    // Parabolic fit on the real part after rotating the peak to the real axis.
    let rot = a[peak_i].conj() / peak;
    let re = |i: usize| (a[i % n] * rot).re;
    let ym = re(peak_i + n - 1);
    let y0 = re(peak_i);
    let yp = re(peak_i + 1);
    let den = ym - 2.0 * y0 + yp;
    let frac = if den < 0.0 { (0.5 * (ym - yp) / den).clamp(-0.5, 0.5) } else { 0.0 };
    // Noise on the real part from off-peak power; curvature implied by the reference bandwidth.
    let off = ((mag.iter().map(|m| m * m).sum::<f64>() - peak * peak) / (n - 1) as f64 / 2.0).max(0.0);
    let snr = peak * peak / off.max(f64::MIN_POSITIVE);
    let frac_std = 1.0 / (snr * TAU * TAU * f2).sqrt();
    Ok(SyncResult { delay_int: peak_i, frac, frac_std, ratio })
}
