//! Pilot tone isolation and carrier-offset estimation.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::snu::SampleFrame;
use crate::stats;

/// Raised-cosine band mask: flat to ±bw/4, zero beyond ±bw/2.
pub fn mask_weight(df: f64, bw: f64) -> f64 {
    let a = df.abs();
    let flat = bw / 4.0;
    let edge = bw / 2.0;
    if a <= flat {
        1.0
    } else if a >= edge {
        0.0
    } else {
        0.5 * (1.0 + (PI * (a - flat) / (edge - flat)).cos())
    }
}

/// Equivalent noise bandwidth of the mask, in Hz.
pub fn mask_noise_bandwidth(bw: f64) -> f64 {
    bw / 2.0 + 2.0 * (bw / 4.0) * 0.375
}

/// Index of the strongest positive-frequency bin within [lo, hi] Hz.
pub fn find_peak(spectrum: &[Complex64], fs: f64, lo: f64, hi: f64) -> Option<usize> {
    let n = spectrum.len();
    let mut best = None;
    let mut best_p = -1.0;
    for (k, z) in spectrum.iter().enumerate().take(n / 2).skip(1) {
        let f = k as f64 * fs / n as f64;
        if f < lo || f > hi {
            continue;
        }
        let p = z.norm_sqr();
        if p > best_p {
            best_p = p;
            best = Some(k);
        }
    }
    best
}

/// Mask a spectrum around `center_hz` and return the time-domain tone.
pub fn extract_from_spectrum(spectrum: &[Complex64], fs: f64, center_hz: f64, bw_hz: f64) -> Vec<Complex64> {
    let n = spectrum.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let half = (bw_hz / 2.0 * n as f64 / fs).ceil() as isize + 1;
    let c = (center_hz * n as f64 / fs).round() as isize;
    for d in -half..=half {
        let k = (c + d).rem_euclid(n as isize) as usize;
        let w = mask_weight(dsp::bin_freq(k, n, fs) - center_hz, bw_hz);
        out[k] = spectrum[k] * w;
    }
    dsp::ifft(&mut out);
    out
}

/// Band-pass a complex (analytic) frame around the pilot frequency.
pub fn pilot_extract(frame: &SampleFrame, pilot_freq_hz: f64, bw_hz: f64) -> Result<Vec<Complex64>> {
    let fs = frame.sample_rate_hz;
    if !(bw_hz > 0.0) || bw_hz >= fs / 2.0 {
        return Err(Error::Domain(format!("pilot bandwidth {bw_hz} Hz out of range")));
    }
    if !(pilot_freq_hz.abs() < fs / 2.0) {
        return Err(Error::Domain(format!("pilot frequency {pilot_freq_hz} Hz beyond Nyquist")));
    }
    let mut s = frame.to_f64();
    dsp::fft(&mut s);
    Ok(extract_from_spectrum(&s, fs, pilot_freq_hz, bw_hz))
}

/// Unwrapped phase of a complex sequence.
pub fn unwrapped_phase(x: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    let mut prev = None;
    for z in x {
        let p = z.arg();
        match prev {
            None => acc = p,
            Some(q) => acc += stats::wrap_phase(p - q),
        }
        prev = Some(p);
        out.push(acc);
    }
    out
}

/// Default limit on the RMS deviation of phase increments from the fitted slope.
pub const FREQ_FIT_MAX_RESIDUAL: f64 = 0.5;

/// Least-squares frequency of an isolated tone from its unwrapped phase.
///
/// Fails when the increments scatter by more than `max_residual` rad, which is where unwrapping slips.
pub fn freq_offset_fit(pilot: &[Complex64], fs: f64, max_residual: f64) -> Result<f64> {
    if pilot.len() < 16 {
        return Err(Error::Estimation("pilot too short for a frequency fit".into()));
    }
    let phase = unwrapped_phase(pilot);
    let x: Vec<f64> = (0..phase.len()).map(|i| i as f64).collect();
    let (slope, _) = stats::linear_fit(&x, &phase);
    let rms = (phase.windows(2).map(|w| (w[1] - w[0] - slope).powi(2)).sum::<f64>() / (phase.len() - 1) as f64).sqrt();
    if !(rms <= max_residual) {
        return Err(Error::Estimation(format!("pilot phase unwrap unreliable (increment rms {rms:.3} rad)")));
    }
    Ok(slope * fs / TAU)
}

/// Per-quadrature white-equivalent noise variance around the pilot, from spectrum bins 1 to 3 MHz away.
pub fn local_noise_floor(spectrum: &[Complex64], fs: f64, center_hz: f64) -> f64 {
    let n = spectrum.len();
    let mut acc = 0.0;
    let mut cnt = 0usize;
    for side in [-1.0, 1.0] {
        let lo = center_hz + side * 1e6;
        let hi = center_hz + side * 3e6;
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let ka = (a * n as f64 / fs).ceil().max(0.0) as usize;
        let kb = ((b * n as f64 / fs).floor() as usize).min(n - 1);
        for z in spectrum.iter().take(kb + 1).skip(ka) {
            acc += z.norm_sqr();
            cnt += 1;
        }
    }
    if cnt == 0 {
        return 0.0;
    }
    acc / cnt as f64 / (2.0 * n as f64)
}
