//! Static equalizer that inverts the receiver response, estimated from vacuum frames.

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::snu::SampleFrame;

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningFilter {
    /// Inverse response on a `seg`-point grid over [0, fs).
    pub freq_response_inverse: Vec<Complex64>,
    pub n_frames_averaged: usize,
}

impl WhiteningFilter {
    pub fn identity(seg: usize) -> Self {
        WhiteningFilter { freq_response_inverse: vec![Complex64::new(1.0, 0.0); seg], n_frames_averaged: 0 }
    }

    /// Linear interpolation of the inverse response onto an n-point FFT grid.
    pub fn on_grid(&self, n: usize) -> Vec<Complex64> {
        let w = &self.freq_response_inverse;
        let l = w.len();
        (0..n)
            .map(|k| {
                let pos = k as f64 * l as f64 / n as f64;
                let i0 = pos.floor() as usize % l;
                let t = pos - pos.floor();
                w[i0] * (1.0 - t) + w[(i0 + 1) % l] * t
            })
            .collect()
    }

    /// Whiten a real frame in place of its spectrum: returns the whitened spectrum.
    pub fn apply_spectrum(&self, spectrum: &mut [Complex64]) {
        let g = self.on_grid(spectrum.len());
        for (x, w) in spectrum.iter_mut().zip(&g) {
            *x *= w;
        }
    }

    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        let mut s: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        dsp::fft(&mut s);
        self.apply_spectrum(&mut s);
        dsp::ifft(&mut s);
        s.iter().map(|c| c.re).collect()
    }
}

/// Minimum-phase spectrum with the given log-magnitude (real cepstrum folding).
pub fn minimum_phase(log_mag: &[f64]) -> Vec<Complex64> {
    let l = log_mag.len();
    let mut c: Vec<Complex64> = log_mag.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dsp::ifft(&mut c);
    let mut folded = vec![Complex64::new(0.0, 0.0); l];
    folded[0] = c[0];
    for k in 1..l.div_ceil(2) {
        folded[k] = c[k] * 2.0;
    }
    if l % 2 == 0 {
        folded[l / 2] = c[l / 2];
    }
    dsp::fft(&mut folded);
    folded.iter().map(|z| z.exp()).collect()
}

/// Average Welch periodograms of the vacuum frames, smooth, floor at 1e-6 of the peak and invert.
///
/// The inverse is normalized so that white input keeps its variance.
pub fn whitening_estimate(vacuum_frames: &[SampleFrame], n_avg: usize) -> Result<WhiteningFilter> {
    whitening_estimate_seg(vacuum_frames, n_avg, 256)
}

pub fn whitening_estimate_seg(vacuum_frames: &[SampleFrame], n_avg: usize, seg: usize) -> Result<WhiteningFilter> {
    if n_avg < 2 {
        return Err(Error::Estimation("whitening needs at least two frames".into()));
    }
    if vacuum_frames.len() < n_avg {
        return Err(Error::Estimation(format!("whitening asked for {n_avg} frames, got {}", vacuum_frames.len())));
    }
    let mut p = vec![0.0; seg];
    for f in &vacuum_frames[..n_avg] {
        if f.len() < seg {
            return Err(Error::Estimation("frame shorter than the periodogram segment".into()));
        }
        for (a, b) in p.iter_mut().zip(dsp::welch_psd(&f.real_f64(), seg)) {
            *a += b;
        }
    }
    // Circular 5-bin moving average.
    let sm: Vec<f64> = (0..seg)
        .map(|k| (0..5).map(|j| p[(k + seg + j - 2) % seg]).sum::<f64>() / 5.0)
        .collect();
    let peak = sm.iter().cloned().fold(0.0, f64::max);
    let floored: Vec<f64> = sm.iter().map(|&v| v.max(1e-6 * peak)).collect();
    let mean = floored.iter().sum::<f64>() / seg as f64;
    let log_mag: Vec<f64> = floored.iter().map(|&v| 0.5 * (mean / v).ln()).collect();
    Ok(WhiteningFilter { freq_response_inverse: minimum_phase(&log_mag), n_frames_averaged: n_avg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{vacuum_frame, DetectorModel};

    #[test]
    fn minimum_phase_recovers_one_pole() {
        let det = DetectorModel::default();
        let h = det.response(256, 1e9);
        let log_mag: Vec<f64> = h.iter().map(|z| z.norm().ln()).collect();
        let mp = minimum_phase(&log_mag);
        for (a, b) in mp.iter().zip(&h) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn white_input_gives_near_identity() {
        let det = DetectorModel { bandwidth_hz: f64::INFINITY, ..Default::default() };
        let frames: Vec<_> = (0..4).map(|i| vacuum_frame(100_000, 1e9, &det, 1, i).unwrap()).collect();
        let w = whitening_estimate(&frames, 4).unwrap();
        for z in &w.freq_response_inverse {
            assert!((z.norm() - 1.0).abs() < 0.03, "{z}");
        }
    }

    #[test]
    fn too_few_frames() {
        let det = DetectorModel::default();
        let frames = vec![vacuum_frame(1000, 1e9, &det, 1, 0).unwrap()];
        assert!(whitening_estimate(&frames, 1).is_err());
        assert!(whitening_estimate(&frames, 2).is_err());
    }

    #[test]
    fn one_pole_whitened_flat_and_uncorrelated() {
        let det = DetectorModel::default();
        let frames: Vec<_> = (0..8).map(|i| vacuum_frame(100_000, 1e9, &det, 2, i).unwrap()).collect();
        let w = whitening_estimate(&frames, 8).unwrap();
        let mut psd = vec![0.0; 256];
        let mut acf = vec![0.0; 6];
        for i in 0..8 {
            let fresh = vacuum_frame(100_000, 1e9, &det, 3, i).unwrap();
            let y = w.apply_real(&fresh.real_f64());
            for (a, b) in psd.iter_mut().zip(dsp::welch_psd(&y, 256)) {
                *a += b / 8.0;
            }
            let v: f64 = y.iter().map(|x| x * x).sum();
            for (k, a) in acf.iter_mut().enumerate().skip(1) {
                *a += y.windows(k + 1).map(|p| p[0] * p[k]).sum::<f64>() / v / 8.0;
            }
        }
        let m = psd.iter().sum::<f64>() / 256.0;
        for k in 2..=126 {
            let db = 10.0 * (psd[k] / m).log10();
            assert!(db.abs() < 0.5, "bin {k}: {db} dB");
        }
        for a in &acf[1..] {
            assert!(a.abs() < 0.01, "{a}");
        }
    }
}
