//! Bob's receiver chain: SNU scaling, whitening, pilot tracking, sync and matched filtering.

pub mod pilot;
pub mod sync;
pub mod ukf;
pub mod whitening;

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{circular_delay, PhaseTrace};
use crate::dsp;
use crate::error::{config, Error, Result};
use crate::snu::{CalibrationRecord, SampleFrame, SymbolFrame, Unit};
use crate::tx::ModulationConfig;

pub use pilot::{freq_offset_fit, pilot_extract};
pub use sync::{estimate_delay, SyncResult};
pub use ukf::{ukf_phase_track, PhaseTrack, PhaseTrackState, RpnEstimate, SigmaParams};
pub use whitening::{whitening_estimate, WhiteningFilter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RxConfig {
    pub pilot_bandwidth_hz: f64,
    /// Centre of the pilot search window is the nominal pilot plus this offset.
    pub expected_offset_hz: f64,
    pub pilot_search_hz: f64,
    pub freq_fit_max_residual: f64,
    pub linewidth_hint_hz: f64,
    pub sigma: SigmaParams,
    pub smoother: bool,
    pub p_ceiling: f64,
    pub sync_ref_symbols: usize,
    pub sync_min_ratio: f64,
    /// The parabolic fractional delay is applied only when its standard error is below this.
    pub frac_max_std: f64,
    pub whitening_segment: usize,
    pub whitening_frames: usize,
}

impl Default for RxConfig {
    fn default() -> Self {
        RxConfig {
            pilot_bandwidth_hz: 1e6,
            expected_offset_hz: 2.3e8,
            pilot_search_hz: 1e7,
            freq_fit_max_residual: pilot::FREQ_FIT_MAX_RESIDUAL,
            linewidth_hint_hz: 200.0,
            sigma: SigmaParams::default(),
            smoother: true,
            p_ceiling: 1.0,
            sync_ref_symbols: 10_000,
            sync_min_ratio: 6.0,
            frac_max_std: 0.02,
            whitening_segment: 256,
            whitening_frames: 1000,
        }
    }
}

impl RxConfig {
    pub fn validate(&self, tx: &ModulationConfig) -> Result<()> {
        let fs = tx.sample_rate_hz;
        let lo = tx.pilot_freq_hz + self.expected_offset_hz - self.pilot_search_hz;
        let hi = tx.pilot_freq_hz + self.expected_offset_hz + self.pilot_search_hz;
        let band_hi = tx.signal_center_hz + self.expected_offset_hz + tx.baud_rate_hz * (1.0 + tx.rrc_rolloff) / 2.0;
        let band_lo = tx.signal_center_hz + self.expected_offset_hz - tx.baud_rate_hz * (1.0 + tx.rrc_rolloff) / 2.0;
        if !(lo > band_hi && hi < fs / 2.0) {
            return config(format!("pilot search window [{lo:.3e}, {hi:.3e}] Hz overlaps the signal band or Nyquist"));
        }
        if !(band_lo > 0.0) {
            return config("received signal band crosses DC");
        }
        if !(self.pilot_bandwidth_hz > 0.0 && self.pilot_bandwidth_hz < 2.0 * (lo - band_hi)) {
            return config("pilot bandwidth too wide for the guard band");
        }
        if self.sync_ref_symbols == 0 || self.whitening_frames < 2 || self.whitening_segment < 16 {
            return config("sync reference, whitening frames and segment must be positive");
        }
        Ok(())
    }
}

/// Per-frame DSP diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RxReport {
    pub frame_id: u64,
    pub pilot_freq_hz: f64,
    pub freq_offset_hz: f64,
    pub pilot_amplitude: f64,
    pub pilot_noise_r: f64,
    pub v_rpn_self: f64,
    pub delay_samples: f64,
    pub frac_applied: bool,
    pub sync_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RxOutput {
    /// Bob's symbols in SNU, index-aligned with Alice's frame, starting at symbol 0.
    pub symbols: SymbolFrame,
    pub report: RxReport,
    /// Reconstructed absolute pilot phase per sample.
    pub pilot_phase: Vec<f64>,
}

/// Normalized real photocurrent as complex f64, SNU.
fn snu_samples(frame: &SampleFrame, cal: &CalibrationRecord) -> Result<Vec<Complex64>> {
    match frame.unit {
        Unit::AdcCounts => {
            let k = 1.0 / cal.snu_scale.sqrt();
            Ok(frame.samples.iter().map(|c| Complex64::new(c.re as f64 * k, 0.0)).collect())
        }
        Unit::SnuNormalized => Ok(frame.samples.iter().map(|c| Complex64::new(c.re as f64, 0.0)).collect()),
    }
}

/// Whitened analytic spectrum of a frame: negative frequencies removed, positive ones doubled.
pub fn whitened_analytic_spectrum(frame: &SampleFrame, cal: &CalibrationRecord, wf: &WhiteningFilter) -> Result<Vec<Complex64>> {
    let mut s = snu_samples(frame, cal)?;
    dsp::fft(&mut s);
    wf.apply_spectrum(&mut s);
    let n = s.len();
    for (k, v) in s.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            continue;
        }
        if k < n.div_ceil(2) {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    Ok(s)
}

/// Sample-spaced reference waveform carrying only the first `k` symbols.
pub fn sync_reference(tx_symbols: &[Complex64], k: usize, taps: &[f64], sps: usize) -> Vec<Complex64> {
    let mut s = tx_symbols.to_vec();
    for v in s.iter_mut().skip(k) {
        *v = Complex64::new(0.0, 0.0);
    }
    dsp::pulse_shape(&s, taps, sps)
}

/// Run the receiver on one frame. `tx_symbols` is Alice's frame; only the first `sync_ref_symbols` are used.
pub fn recover_symbols(
    frame: &SampleFrame,
    cal: &CalibrationRecord,
    wf: &WhiteningFilter,
    tx: &ModulationConfig,
    rx: &RxConfig,
    tx_symbols: &SymbolFrame,
) -> Result<RxOutput> {
    let fid = frame.frame_id;
    recover_inner(frame, cal, wf, tx, rx, tx_symbols).map_err(|e| match e {
        Error::InFrame { .. } | Error::Tracking { .. } | Error::Sync { .. } => e,
        other => Error::InFrame { frame_id: fid, source: Box::new(other) },
    })
}

fn recover_inner(
    frame: &SampleFrame,
    cal: &CalibrationRecord,
    wf: &WhiteningFilter,
    tx: &ModulationConfig,
    rx: &RxConfig,
    tx_symbols: &SymbolFrame,
) -> Result<RxOutput> {
    let fs = frame.sample_rate_hz;
    let n = frame.len();
    let sps = tx.sps();
    if (fs - tx.sample_rate_hz).abs() > 1e-6 * fs || n % sps != 0 || tx_symbols.len() != n / sps {
        return Err(Error::Contract("frame length, sample rate and symbol count disagree".into()));
    }
    let spec = whitened_analytic_spectrum(frame, cal, wf)?;

    let centre = tx.pilot_freq_hz + rx.expected_offset_hz;
    let k = pilot::find_peak(&spec, fs, centre - rx.pilot_search_hz, centre + rx.pilot_search_hz)
        .ok_or_else(|| Error::Estimation("pilot search window empty".into()))?;
    let f_peak = k as f64 * fs / n as f64;
    let pil = pilot::extract_from_spectrum(&spec, fs, f_peak, rx.pilot_bandwidth_hz);
    let f_hat = freq_offset_fit(&pil, fs, rx.freq_fit_max_residual)?;

    let r = pilot::local_noise_floor(&spec, fs, f_hat);
    let enbw = pilot::mask_noise_bandwidth(rx.pilot_bandwidth_hz);
    let p_tot = pil.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    let amp = (p_tot - 2.0 * r * enbw / fs).max(1e-6 * p_tot).sqrt();

    let bb: Vec<Complex64> = pil
        .iter()
        .enumerate()
        .map(|(i, z)| z * Complex64::from_polar(1.0, -TAU * (f_hat * i as f64 / fs).fract()))
        .collect();
    let q = PhaseTrackState::q_from_linewidth(rx.linewidth_hint_hz, fs);
    let init = PhaseTrackState::initial(&bb, q, r, amp, rx.sigma);
    let (track, rpn) = ukf_phase_track(&bb, init, rx.smoother, rx.p_ceiling, frame.frame_id)?;

    let mut z = spec;
    dsp::ifft(&mut z);
    let mut pilot_phase = Vec::with_capacity(n);
    let shift = tx.pilot_freq_hz - tx.signal_center_hz;
    for (i, v) in z.iter_mut().enumerate() {
        let ramp = TAU * (f_hat * i as f64 / fs).fract();
        let ph = ramp + track.theta[i];
        pilot_phase.push(TAU * f_hat * i as f64 / fs + track.theta[i]);
        *v -= pil[i];
        *v *= Complex64::from_polar(1.0, -(ph - TAU * (shift * i as f64 / fs).fract()));
    }

    let taps = tx.taps()?;
    let reference = sync_reference(&tx_symbols.symbols, rx.sync_ref_symbols.min(tx_symbols.len()), &taps, sps);
    let sy = estimate_delay(&z, &reference, rx.sync_min_ratio, frame.frame_id)?;
    let use_frac = sy.frac_std <= rx.frac_max_std;
    let mut d = sy.delay(use_frac);
    if d > n as f64 / 2.0 {
        d -= n as f64;
    }
    let psi = TAU * shift * d / fs;
    let mut aligned = circular_delay(&z, -d);
    let rot = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -psi);
    for v in aligned.iter_mut() {
        *v *= rot;
    }
    let y = dsp::matched_filter_decimate(&aligned, &taps, sps, 0);

    let report = RxReport {
        frame_id: frame.frame_id,
        pilot_freq_hz: f_hat,
        freq_offset_hz: f_hat - tx.pilot_freq_hz,
        pilot_amplitude: amp,
        pilot_noise_r: r,
        v_rpn_self: rpn.v_rpn,
        delay_samples: d,
        frac_applied: use_frac,
        sync_ratio: sy.ratio,
    };
    Ok(RxOutput { symbols: SymbolFrame::new(y, tx.baud_rate_hz), report, pilot_phase })
}

/// Residual phase noise of the recovered pilot phase against the simulated truth.
pub fn v_rpn_against_truth(pilot_phase: &[f64], trace: &PhaseTrace, pilot_freq_hz: f64) -> f64 {
    let fs = trace.sample_rate_hz;
    let truth: Vec<f64> = trace.theta.iter().enumerate().map(|(i, t)| TAU * pilot_freq_hz * i as f64 / fs + t).collect();
    ukf::residual_phase_variance(pilot_phase, &truth)
}

/// Symbol-rate noise stream from a frame without a pilot, downconverted at a fixed carrier.
pub fn noise_symbols(
    frame: &SampleFrame,
    cal: &CalibrationRecord,
    wf: &WhiteningFilter,
    tx: &ModulationConfig,
    carrier_hz: f64,
) -> Result<Vec<Complex64>> {
    let mut z = whitened_analytic_spectrum(frame, cal, wf)?;
    dsp::ifft(&mut z);
    let fs = frame.sample_rate_hz;
    for (i, v) in z.iter_mut().enumerate() {
        *v *= Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -TAU * (carrier_hz * i as f64 / fs).fract());
    }
    Ok(dsp::matched_filter_decimate(&z, &tx.taps()?, tx.sps(), 0))
}

pub fn write_reports(path: &Path, reports: &[RxReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{simulate_signal_frame, vacuum_frame, ChannelParams, DetectorModel};
    use crate::tx::generate_symbols_indexed;

    fn setup(length_km: f64, linewidth: f64) -> (ModulationConfig, ChannelParams, DetectorModel, RxConfig) {
        let tx = ModulationConfig::default();
        let mut ch = ChannelParams { length_km, delay_samples: 1234.0, ..Default::default() };
        ch.linewidth_tx_hz = linewidth / 2.0;
        ch.linewidth_rx_hz = linewidth / 2.0;
        ch.match_modulation(&tx);
        let det = DetectorModel::default();
        let rx = RxConfig { sync_ref_symbols: 1000, linewidth_hint_hz: linewidth.max(1.0), ..Default::default() };
        (tx, ch, det, rx)
    }

    fn whitening(det: &DetectorModel, n: usize) -> (CalibrationRecord, WhiteningFilter) {
        let vac: Vec<_> = (0..4).map(|i| crate::channel::adc(&vacuum_frame(n, 1e9, det, 50, 1_000_000 + i).unwrap(), det).unwrap().0).collect();
        let ele: Vec<_> = (0..2)
            .map(|i| crate::channel::adc(&crate::channel::electronic_frame(n, 1e9, det, 50, 2_000_000 + i).unwrap(), det).unwrap().0)
            .collect();
        let cal = crate::snu::snu_calibrate(&vac, &ele).unwrap();
        (cal, whitening_estimate(&vac, 4).unwrap())
    }

    #[test]
    fn back_to_back_recovers_symbols() {
        let (tx, ch, det, rx) = setup(0.0, 200.0);
        let n = 100_000;
        let (cal, wf) = whitening(&det, n);
        let (counts, syms, trace) = simulate_signal_frame(&tx, &ch, &det, n, 7, 3).unwrap();
        let out = recover_symbols(&counts, &cal, &wf, &tx, &rx, &syms).unwrap();
        assert_eq!(out.report.delay_samples, 1234.0);
        assert!((out.report.freq_offset_hz - 2.3e8).abs() < 1e3, "{}", out.report.freq_offset_hz);
        let t = ch.eta() * det.tau;
        // Least-squares gain and residual.
        let (mut sxy, mut sxx) = (Complex64::new(0.0, 0.0), 0.0);
        for (a, b) in syms.symbols.iter().zip(&out.symbols.symbols) {
            sxy += a.conj() * b;
            sxx += a.norm_sqr();
        }
        let g = sxy / sxx;
        assert!(g.im.abs() < 0.01 * g.re, "{g}");
        assert!((g.re / (t / 2.0).sqrt() - 1.0).abs() < 0.01, "{g} vs {}", (t / 2.0).sqrt());
        let res: f64 = syms.symbols.iter().zip(&out.symbols.symbols).map(|(a, b)| (b - g * a).norm_sqr()).sum::<f64>()
            / (2.0 * syms.len() as f64);
        let expect = 1.0 + det.t_noise / 2.0;
        assert!((res / expect - 1.0).abs() < 0.02, "{res} vs {expect}");
        let v = v_rpn_against_truth(&out.pilot_phase, &trace, tx.pilot_freq_hz);
        assert!(v < 1e-3, "{v}");
    }

    #[test]
    fn scaling_is_linear() {
        let (tx, ch, det, rx) = setup(20.0, 200.0);
        let n = 50_000;
        let (cal, wf) = whitening(&det, n);
        let (counts, syms, _) = simulate_signal_frame(&tx, &ch, &det, n, 8, 0).unwrap();
        let a = recover_symbols(&counts, &cal, &wf, &tx, &rx, &syms).unwrap();
        let mut scaled = counts.clone();
        for v in scaled.samples.iter_mut() {
            *v *= 3.0;
        }
        let b = recover_symbols(&scaled, &cal, &wf, &tx, &rx, &syms).unwrap();
        for (x, y) in a.symbols.symbols.iter().zip(&b.symbols.symbols) {
            assert!((y - x * 3.0).norm() < 1e-3 * (1.0 + x.norm()), "{x} {y}");
        }
    }

    #[test]
    fn whitened_noise_symbols_are_white() {
        let det = DetectorModel::default();
        let tx = ModulationConfig::default();
        let n = 200_000;
        let (cal, wf) = whitening(&det, n);
        let f = crate::channel::adc(&vacuum_frame(n, 1e9, &det, 51, 5).unwrap(), &det).unwrap().0;
        let y = noise_symbols(&f, &cal, &wf, &tx, 3.3e8).unwrap();
        let e: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        let var = e / (2.0 * y.len() as f64);
        assert!((var / (1.0 + det.t_noise / 2.0) - 1.0).abs() < 0.03, "{var}");
        let lim = 3.0 / (y.len() as f64).sqrt();
        for k in 1..=100 {
            let c: Complex64 = (0..y.len()).map(|i| y[i] * y[(i + k) % y.len()].conj()).sum::<Complex64>() / e;
            assert!(c.norm() < lim, "lag {k}: {}", c.norm());
        }
    }

    #[test]
    fn wrong_symbol_count_rejected() {
        let (tx, ch, det, rx) = setup(0.0, 0.0);
        let n = 20_000;
        let (cal, wf) = whitening(&det, n);
        let (counts, _, _) = simulate_signal_frame(&tx, &ch, &det, n, 1, 0).unwrap();
        let other = generate_symbols_indexed(10, &tx, 1, 0);
        assert!(recover_symbols(&counts, &cal, &wf, &tx, &rx, &other).is_err());
    }
}
