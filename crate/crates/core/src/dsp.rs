//! FFT plumbing and filtering primitives shared by the transmitter and receiver.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub fn fft_forward(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

pub fn fft_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(n)
}

/// In-place forward FFT.
pub fn fft(x: &mut [Complex64]) {
    fft_forward(x.len()).process(x);
}

/// In-place inverse FFT, normalized by 1/n.
pub fn ifft(x: &mut [Complex64]) {
    let n = x.len();
    fft_inverse(n).process(x);
    let k = 1.0 / n as f64;
    for v in x.iter_mut() {
        *v *= k;
    }
}

/// Signed frequency of FFT bin `k` out of `n` at sample rate `fs`.
pub fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    if k <= n / 2 {
        k as f64 * fs / n as f64
    } else {
        (k as f64 - n as f64) * fs / n as f64
    }
}

/// Circular matched filter followed by decimation.
///
/// Output k is Σ_j taps[j]·x[(k·sps + j − half) mod n], i.e. the filter is centred on sample k·sps + `offset`.
pub fn matched_filter_decimate(x: &[Complex64], taps: &[f64], sps: usize, offset: usize) -> Vec<Complex64> {
    let n = x.len();
    let half = taps.len() / 2;
    let count = n / sps;
    (0..count)
        .map(|k| {
            let c = k * sps + offset + n - half;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &t) in taps.iter().enumerate() {
                acc += x[(c + j) % n] * t;
            }
            acc
        })
        .collect()
}

/// Circular upsample-and-filter: symbol k is centred on sample k·sps.
pub fn pulse_shape(symbols: &[Complex64], taps: &[f64], sps: usize) -> Vec<Complex64> {
    let n = symbols.len() * sps;
    let half = taps.len() / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, &a) in symbols.iter().enumerate() {
        let base = k * sps + n * (half / n + 1) - half;
        for (j, &t) in taps.iter().enumerate() {
            out[(base + j) % n] += a * t;
        }
    }
    out
}

/// Averaged one-sided-per-bin periodogram of a real signal with a Hann window (Welch, 50 % overlap).
///
/// Returns `seg` bins of power per bin; the average over bins equals the signal variance for white input.
pub fn welch_psd(x: &[f64], seg: usize) -> Vec<f64> {
    let win: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / seg as f64).cos())
        .collect();
    let wpow: f64 = win.iter().map(|w| w * w).sum::<f64>();
    let plan = fft_forward(seg);
    let mut acc = vec![0.0; seg];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut count = 0usize;
    let step = seg / 2;
    let mut start = 0;
    while start + seg <= x.len() {
        for i in 0..seg {
            buf[i] = Complex64::new(x[start + i] * win[i], 0.0);
        }
        plan.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let k = 1.0 / (count.max(1) as f64 * wpow);
    acc.iter().map(|a| a * k).collect()
}
