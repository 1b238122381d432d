//! Physical layer between Alice's DAC and Bob's ADC.
//!
//! The simulated photocurrent is carried as a complex analytic signal whose real part is what the
//! ADC digitizes. Shot noise is complex white noise with unit variance per quadrature, so a single
//! real photocurrent carries both quadratures and the image-band vacuum, as in RF heterodyne.

use std::f64::consts::TAU;

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{domain, Error, Result};
use crate::snu::rng::{Gaussian, Stream};
use crate::snu::{NoiseBudget, SampleFrame, SymbolFrame, Unit};
use crate::tx::{self, ModulationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub length_km: f64,
    pub atten_db_per_km: f64,
    pub coupling_transmittance: f64,
    /// Overrides the loss law when set.
    pub eta_override: Option<f64>,
    pub linewidth_tx_hz: f64,
    pub linewidth_rx_hz: f64,
    pub freq_offset_hz: f64,
    /// Excess noise injected at the channel output, SNU per quadrature.
    pub xi_injected: NoiseBudget,
    /// Circular propagation delay in samples (may be fractional).
    pub delay_samples: f64,
    /// Fixed initial phase; drawn uniformly from [0, 2π) when absent.
    pub initial_phase: Option<f64>,
    /// Band of the quantum signal, used to shape the injected excess noise into the signal mode.
    pub signal_center_hz: f64,
    pub baud_rate_hz: f64,
    pub rrc_rolloff: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            length_km: 100.0,
            atten_db_per_km: 0.146,
            coupling_transmittance: 0.82,
            eta_override: None,
            linewidth_tx_hz: 100.0,
            linewidth_rx_hz: 100.0,
            freq_offset_hz: 2.3e8,
            xi_injected: NoiseBudget::default(),
            delay_samples: 0.0,
            initial_phase: None,
            signal_center_hz: 1e8,
            baud_rate_hz: 1e8,
            rrc_rolloff: 0.2,
        }
    }
}

impl ChannelParams {
    pub fn eta(&self) -> f64 {
        self.eta_override
            .unwrap_or_else(|| eta_at(self.length_km, self.atten_db_per_km, self.coupling_transmittance))
    }

    pub fn combined_linewidth_hz(&self) -> f64 {
        self.linewidth_tx_hz + self.linewidth_rx_hz
    }

    /// Shape the injected excess noise like the transmitted signal.
    pub fn match_modulation(&mut self, cfg: &ModulationConfig) {
        self.signal_center_hz = cfg.signal_center_hz;
        self.baud_rate_hz = cfg.baud_rate_hz;
        self.rrc_rolloff = cfg.rrc_rolloff;
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.eta();
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Config(format!("eta {eta} outside (0, 1]")));
        }
        if self.linewidth_tx_hz < 0.0 || self.linewidth_rx_hz < 0.0 {
            return Err(Error::Config("negative linewidth".into()));
        }
        if !self.xi_injected.is_valid() {
            return Err(Error::Config("excess-noise components must be non-negative".into()));
        }
        if self.delay_samples < 0.0 {
            return Err(Error::Config("delay must be non-negative".into()));
        }
        Ok(())
    }
}

/// η = coupling · 10^(−α·L/10).
pub fn eta_at(length_km: f64, atten_db_per_km: f64, coupling: f64) -> f64 {
    coupling * 10f64.powf(-atten_db_per_km * length_km / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    pub tau: f64,
    /// Trusted electronic noise, SNU, split t/2 per quadrature.
    pub t_noise: f64,
    /// One-pole response corner; infinite disables the filter.
    pub bandwidth_hz: f64,
    pub adc_bits: u32,
    /// ADC full scale in units of the vacuum standard deviation.
    pub adc_full_scale: f64,
    /// Turning shot noise off is only meaningful for identity-channel tests.
    pub shot_noise: bool,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            tau: 0.68,
            t_noise: 62.72e-3,
            bandwidth_hz: 3.65e8,
            adc_bits: 16,
            adc_full_scale: 64.0,
            shot_noise: true,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1]", self.tau)));
        }
        if !(self.t_noise >= 0.0) {
            return Err(Error::Config("t_noise must be non-negative".into()));
        }
        if !(4..=24).contains(&self.adc_bits) || !(self.adc_full_scale > 0.0) {
            return Err(Error::Config("bad ADC settings".into()));
        }
        Ok(())
    }

    /// ADC counts per unit SNU amplitude.
    pub fn adc_gain(&self) -> f64 {
        (1u64 << (self.adc_bits - 1)) as f64 / self.adc_full_scale
    }

    /// Expected clearance of vacuum over electronic noise.
    pub fn clearance_db(&self) -> f64 {
        10.0 * ((1.0 + self.t_noise / 2.0) / (self.t_noise / 2.0)).log10()
    }

    /// Complex response of the receiver on an FFT grid of n bins, unit noise-power gain.
    pub fn response(&self, n: usize, fs: f64) -> Vec<Complex64> {
        if !self.bandwidth_hz.is_finite() {
            return vec![Complex64::new(1.0, 0.0); n];
        }
        let a = (-TAU * self.bandwidth_hz / fs).exp();
        let norm = ((1.0 + a) / (1.0 - a)).sqrt();
        (0..n)
            .map(|k| {
                let w = TAU * k as f64 / n as f64;
                let z1 = Complex64::from_polar(1.0, -w);
                norm * (1.0 - a) / (1.0 - a * z1)
            })
            .collect()
    }
}

/// Ground-truth relative phase per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace {
    pub theta: Vec<f64>,
    pub freq_offset_hz: f64,
    pub initial_phase: f64,
    pub sample_rate_hz: f64,
}

impl PhaseTrace {
    /// Phase with the deterministic offset ramp removed: Wiener drift plus initial phase.
    pub fn drift(&self) -> Vec<f64> {
        let fs = self.sample_rate_hz;
        self.theta
            .iter()
            .enumerate()
            .map(|(n, t)| t - TAU * self.freq_offset_hz * n as f64 / fs)
            .collect()
    }
}

/// Wiener phase with increments N(0, 2π·Δν/fs), starting at 0.
pub fn wiener_phase(n: usize, combined_linewidth_hz: f64, sample_rate_hz: f64, seed: u64) -> Result<PhaseTrace> {
    wiener_phase_indexed(n, combined_linewidth_hz, sample_rate_hz, seed, 0)
}

pub fn wiener_phase_indexed(n: usize, linewidth: f64, fs: f64, seed: u64, index: u64) -> Result<PhaseTrace> {
    if n == 0 {
        return domain("trace length must be positive");
    }
    if linewidth < 0.0 {
        return domain(format!("negative linewidth {linewidth}"));
    }
    let sd = (TAU * linewidth / fs).sqrt();
    let mut theta = Vec::with_capacity(n);
    let mut acc = 0.0;
    theta.push(0.0);
    if sd > 0.0 {
        let mut g = Gaussian::new(seed, Stream::Phase, index);
        for _ in 1..n {
            acc += sd * g.sample();
            theta.push(acc);
        }
    } else {
        theta.resize(n, 0.0);
    }
    Ok(PhaseTrace { theta, freq_offset_hz: 0.0, initial_phase: 0.0, sample_rate_hz: fs })
}

/// Circular delay by a possibly fractional number of samples.
pub fn circular_delay(x: &[Complex64], delay: f64) -> Vec<Complex64> {
    let n = x.len();
    let d_int = delay.floor();
    let frac = delay - d_int;
    let shift = (d_int as i64).rem_euclid(n as i64) as usize;
    let mut out: Vec<Complex64> = (0..n).map(|i| x[(i + n - shift) % n]).collect();
    if frac != 0.0 {
        dsp::fft(&mut out);
        for (k, v) in out.iter_mut().enumerate() {
            let f = dsp::bin_freq(k, n, 1.0);
            *v *= Complex64::from_polar(1.0, -TAU * f * frac);
        }
        dsp::ifft(&mut out);
    }
    out
}

/// Untrusted part: delay, loss, excess noise in the signal mode, laser phase.
fn optical(x: &[Complex64], ch: &ChannelParams, fs: f64, seed: u64, index: u64) -> Result<(Vec<Complex64>, PhaseTrace)> {
    let n = x.len();
    let eta = ch.eta();
    let mut y = circular_delay(x, ch.delay_samples);
    for v in y.iter_mut() {
        *v *= eta.sqrt();
    }
    let xi = ch.xi_injected.total();
    if xi > 0.0 {
        let sps = (fs / ch.baud_rate_hz).round() as usize;
        if sps < 2 || n % sps != 0 {
            return Err(Error::Config("excess-noise shaping needs an integer number of symbols per frame".into()));
        }
        let mut g = Gaussian::new(seed, Stream::Excess, index);
        let s = xi.sqrt();
        let e: Vec<Complex64> = (0..n / sps).map(|_| Complex64::new(s * g.sample(), s * g.sample())).collect();
        let taps = tx::rrc_taps(ch.rrc_rolloff, 20, sps)?;
        let shaped = dsp::pulse_shape(&e, &taps, sps);
        for (i, (v, w)) in y.iter_mut().zip(&shaped).enumerate() {
            *v += w * tx::carrier(ch.signal_center_hz, fs, i);
        }
    }
    let mut trace = wiener_phase_indexed(n, ch.combined_linewidth_hz(), fs, seed, index)?;
    let phi0 = match ch.initial_phase {
        Some(p) => p,
        None => TAU * Gaussian::new(seed, Stream::Phase, index ^ (1 << 63)).uniform(),
    };
    for (i, (v, t)) in y.iter_mut().zip(trace.theta.iter_mut()).enumerate() {
        let cycles = ch.freq_offset_hz * i as f64 / fs;
        let drift = *t + phi0;
        *v *= Complex64::from_polar(1.0, TAU * cycles.fract() + drift);
        *t = drift + TAU * cycles;
    }
    trace.freq_offset_hz = ch.freq_offset_hz;
    trace.initial_phase = phi0;
    Ok((y, trace))
}

/// Trusted part: efficiency, shot and electronic noise, receiver response.
fn detect(mut y: Vec<Complex64>, det: &DetectorModel, fs: f64, shot: bool, seed: u64, index: u64) -> Vec<Complex64> {
    let st = det.tau.sqrt();
    for v in y.iter_mut() {
        *v *= st;
    }
    if shot && det.shot_noise {
        let mut g = Gaussian::new(seed, Stream::Shot, index);
        for v in y.iter_mut() {
            *v += Complex64::new(g.sample(), g.sample());
        }
    }
    if det.t_noise > 0.0 {
        let s = (det.t_noise / 2.0).sqrt();
        let mut g = Gaussian::new(seed, Stream::Electronic, index);
        for v in y.iter_mut() {
            *v += Complex64::new(s * g.sample(), s * g.sample());
        }
    }
    if det.bandwidth_hz.is_finite() {
        let h = det.response(y.len(), fs);
        dsp::fft(&mut y);
        for (v, hk) in y.iter_mut().zip(&h) {
            *v *= hk;
        }
        dsp::ifft(&mut y);
    }
    y
}

/// Fiber, lasers and trusted detector applied to an SNU frame.
///
/// Returns the analytic photocurrent in SNU and the ground-truth phase. The stream index is the frame id.
pub fn propagate(frame: &SampleFrame, ch: &ChannelParams, det: &DetectorModel, seed: u64) -> Result<(SampleFrame, PhaseTrace)> {
    if frame.unit != Unit::SnuNormalized {
        return Err(Error::Contract("propagate expects an snu_normalized frame".into()));
    }
    ch.validate()?;
    det.validate()?;
    let fs = frame.sample_rate_hz;
    let (y, trace) = optical(&frame.to_f64(), ch, fs, seed, frame.frame_id)?;
    let y = detect(y, det, fs, true, seed, frame.frame_id);
    Ok((SampleFrame::from_f64(&y, fs, Unit::SnuNormalized, frame.frame_id)?, trace))
}

/// Photocurrent with Alice's light blocked (shot plus electronic noise).
pub fn vacuum_frame(n: usize, fs: f64, det: &DetectorModel, seed: u64, index: u64) -> Result<SampleFrame> {
    let y = detect(vec![Complex64::new(0.0, 0.0); n], det, fs, true, seed, index);
    SampleFrame::from_f64(&y, fs, Unit::SnuNormalized, index)
}

/// Photocurrent with both lasers off (electronic noise only).
pub fn electronic_frame(n: usize, fs: f64, det: &DetectorModel, seed: u64, index: u64) -> Result<SampleFrame> {
    let y = detect(vec![Complex64::new(0.0, 0.0); n], det, fs, false, seed, index);
    SampleFrame::from_f64(&y, fs, Unit::SnuNormalized, index)
}

/// Digitize the real photocurrent.
pub fn adc(frame: &SampleFrame, det: &DetectorModel) -> Result<(SampleFrame, usize)> {
    if frame.unit != Unit::SnuNormalized {
        return Err(Error::Contract("adc expects an snu_normalized frame".into()));
    }
    let g = det.adc_gain();
    let hi = ((1i64 << (det.adc_bits - 1)) - 1) as f64;
    let lo = -((1i64 << (det.adc_bits - 1)) as f64);
    let mut clipped = 0;
    let samples = frame
        .samples
        .iter()
        .map(|c| {
            let v = (c.re as f64 * g).round();
            let q = v.clamp(lo, hi);
            if q != v {
                clipped += 1;
            }
            Complex::new(q as f32, 0.0)
        })
        .collect();
    Ok((SampleFrame::new(samples, frame.sample_rate_hz, Unit::AdcCounts, frame.frame_id)?, clipped))
}

#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub signal_frames: Vec<SampleFrame>,
    pub vacuum_frames: Vec<SampleFrame>,
    pub electronic_frames: Vec<SampleFrame>,
    pub symbols: Vec<SymbolFrame>,
    pub traces: Vec<PhaseTrace>,
}

#[derive(Debug, Clone, Copy)]
pub struct MeasurementPlan {
    pub samples_per_frame: usize,
    pub signal_frames: usize,
    pub vacuum_frames: usize,
    pub electronic_frames: usize,
}

/// Generate one transmitted frame, its symbols, and the ADC output after the link.
pub fn simulate_signal_frame(
    tx_cfg: &ModulationConfig,
    ch: &ChannelParams,
    det: &DetectorModel,
    samples: usize,
    seed: u64,
    frame_id: u64,
) -> Result<(SampleFrame, SymbolFrame, PhaseTrace)> {
    let sps = tx_cfg.sps();
    let syms = tx::generate_symbols_indexed(samples / sps, tx_cfg, seed, frame_id);
    let mut wave = tx::synthesize_waveform(&syms, tx_cfg)?;
    if tx_cfg.dac_full_scale > 0.0 {
        wave = tx::dac_quantize(&wave, tx_cfg.dac_bits, tx_cfg.dac_full_scale)?.0;
    }
    wave.frame_id = frame_id;
    let (rx, trace) = propagate(&wave, ch, det, seed)?;
    let (counts, _) = adc(&rx, det)?;
    Ok((counts, syms, trace))
}

/// The three measurements of a session: signal, vacuum (Alice blocked), electronic (lasers off).
pub fn make_measurement_set(
    tx_cfg: &ModulationConfig,
    ch: &ChannelParams,
    det: &DetectorModel,
    plan: MeasurementPlan,
    seed: u64,
) -> Result<MeasurementSet> {
    use rayon::prelude::*;
    let fs = tx_cfg.sample_rate_hz;
    let n = plan.samples_per_frame;
    let sig: Vec<_> = (0..plan.signal_frames as u64)
        .into_par_iter()
        .map(|i| simulate_signal_frame(tx_cfg, ch, det, n, seed, i))
        .collect::<Result<_>>()?;
    let vac: Vec<_> = (0..plan.vacuum_frames as u64)
        .into_par_iter()
        .map(|i| adc(&vacuum_frame(n, fs, det, seed, 1_000_000 + i)?, det).map(|r| r.0))
        .collect::<Result<_>>()?;
    let ele: Vec<_> = (0..plan.electronic_frames as u64)
        .into_par_iter()
        .map(|i| adc(&electronic_frame(n, fs, det, seed, 2_000_000 + i)?, det).map(|r| r.0))
        .collect::<Result<_>>()?;
    let mut signal_frames = Vec::new();
    let mut symbols = Vec::new();
    let mut traces = Vec::new();
    for (f, s, t) in sig {
        signal_frames.push(f);
        symbols.push(s);
        traces.push(t);
    }
    Ok(MeasurementSet { signal_frames, vacuum_frames: vac, electronic_frames: ele, symbols, traces })
}
