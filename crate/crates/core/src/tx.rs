//! Alice's waveform synthesis: Gaussian symbols, RRC shaping, carrier shift, pilot tone, DAC.

use std::f64::consts::{PI, TAU};

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{config, domain, Result};
use crate::snu::rng::{Gaussian, Stream};
use crate::snu::{NoiseBudget, SampleFrame, SymbolFrame, Unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    /// Variance of each quadrature of the coherent-state ensemble, SNU.
    pub v_mod: f64,
    pub baud_rate_hz: f64,
    pub sample_rate_hz: f64,
    pub rrc_rolloff: f64,
    pub rrc_span: usize,
    pub signal_center_hz: f64,
    pub pilot_freq_hz: f64,
    /// Pilot amplitude relative to the RMS amplitude of the quantum signal.
    pub pilot_amplitude: f64,
    pub dac_bits: u32,
    /// DAC full scale per real component, in SNU amplitude. Zero disables the DAC.
    pub dac_full_scale: f64,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        ModulationConfig {
            v_mod: 8.41,
            baud_rate_hz: 1e8,
            sample_rate_hz: 1e9,
            rrc_rolloff: 0.2,
            rrc_span: 20,
            signal_center_hz: 1e8,
            pilot_freq_hz: 1.8e8,
            pilot_amplitude: 10.0,
            dac_bits: 16,
            dac_full_scale: 32.0,
        }
    }
}

impl ModulationConfig {
    pub fn sps(&self) -> usize {
        (self.sample_rate_hz / self.baud_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_mod >= 0.0) {
            return config("v_mod must be non-negative");
        }
        if !(self.rrc_rolloff > 0.0 && self.rrc_rolloff <= 1.0) {
            return config(format!("rrc_rolloff {} outside (0, 1]", self.rrc_rolloff));
        }
        let ratio = self.sample_rate_hz / self.baud_rate_hz;
        if !(ratio >= 2.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return config("sample rate must be an integer multiple (≥ 2) of the baud rate");
        }
        let band_edge = self.signal_center_hz + (1.0 + self.rrc_rolloff) * self.baud_rate_hz / 2.0;
        if self.pilot_freq_hz <= band_edge {
            return config(format!("pilot at {} Hz overlaps the signal band ending at {} Hz", self.pilot_freq_hz, band_edge));
        }
        if self.signal_center_hz - (1.0 + self.rrc_rolloff) * self.baud_rate_hz / 2.0 <= 0.0 {
            return config("signal band crosses 0 Hz");
        }
        if self.pilot_freq_hz >= self.sample_rate_hz / 2.0 {
            return config("pilot above Nyquist");
        }
        if self.rrc_span < 8 {
            return config("rrc_span must be at least 8 symbols");
        }
        Ok(())
    }

    /// RMS amplitude per sample of the shaped quantum signal.
    pub fn signal_rms(&self) -> f64 {
        (2.0 * self.v_mod / self.sps() as f64).sqrt()
    }

    /// Absolute pilot amplitude in SNU.
    pub fn pilot_abs_amplitude(&self) -> f64 {
        self.pilot_amplitude * self.signal_rms()
    }

    pub fn taps(&self) -> Result<Vec<f64>> {
        rrc_taps(self.rrc_rolloff, self.rrc_span, self.sps())
    }
}

/// Gaussian symbols with x and p each of variance v_mod; frame `index` selects an independent stream.
pub fn generate_symbols_indexed(count: usize, cfg: &ModulationConfig, seed: u64, index: u64) -> SymbolFrame {
    let mut g = Gaussian::new(seed, Stream::Symbols, index);
    let s = cfg.v_mod.sqrt();
    let symbols = (0..count)
        .map(|_| {
            let x = g.sample();
            let p = g.sample();
            Complex64::new(s * x, s * p)
        })
        .collect();
    SymbolFrame::new(symbols, cfg.baud_rate_hz)
}

pub fn generate_symbols(count: usize, cfg: &ModulationConfig, seed: u64) -> Result<SymbolFrame> {
    if count == 0 {
        return domain("symbol count must be positive");
    }
    Ok(generate_symbols_indexed(count, cfg, seed, 0))
}

/// Root-raised-cosine taps, unit energy, length span·sps + 1, centred.
pub fn rrc_taps(rolloff: f64, span_symbols: usize, samples_per_symbol: usize) -> Result<Vec<f64>> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return domain(format!("rolloff {rolloff} outside (0, 1]"));
    }
    if span_symbols < 8 || samples_per_symbol < 2 {
        return domain("span must be ≥ 8 symbols and sps ≥ 2");
    }
    let b = rolloff;
    let len = span_symbols * samples_per_symbol + 1;
    let half = (len / 2) as i64;
    let sps = samples_per_symbol as f64;
    let mut h: Vec<f64> = (0..len as i64)
        .map(|i| {
            let t = (i - half) as f64 / sps;
            if t == 0.0 {
                1.0 - b + 4.0 * b / PI
            } else if ((4.0 * b * t).abs() - 1.0).abs() < 1e-10 {
                b / 2f64.sqrt() * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                ((PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos())
                    / (PI * t * (1.0 - (4.0 * b * t).powi(2)))
            }
        })
        .collect();
    for k in 0..len / 2 {
        h[len - 1 - k] = h[k];
    }
    let e = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    h.iter_mut().for_each(|x| *x /= e);
    Ok(h)
}

/// Complex exponential e^{i2π f n / fs}.
#[inline]
pub fn carrier(f: f64, fs: f64, n: usize) -> Complex64 {
    let cycles = (n as f64 * f / fs).fract();
    Complex64::from_polar(1.0, TAU * cycles)
}

/// Shaped baseband waveform (no carrier, no pilot) for a symbol sequence.
pub fn baseband_waveform(symbols: &[Complex64], cfg: &ModulationConfig) -> Result<Vec<Complex64>> {
    Ok(dsp::pulse_shape(symbols, &cfg.taps()?, cfg.sps()))
}

/// Upsample, RRC-shape, shift to the signal carrier and add the pilot. The frame is cyclic.
pub fn synthesize_waveform(symbols: &SymbolFrame, cfg: &ModulationConfig) -> Result<SampleFrame> {
    cfg.validate()?;
    let bb = baseband_waveform(&symbols.symbols, cfg)?;
    let a = cfg.pilot_abs_amplitude();
    let fs = cfg.sample_rate_hz;
    let out: Vec<Complex64> = bb
        .iter()
        .enumerate()
        .map(|(n, &s)| s * carrier(cfg.signal_center_hz, fs, n) + a * carrier(cfg.pilot_freq_hz, fs, n))
        .collect();
    SampleFrame::from_f64(&out, fs, Unit::SnuNormalized, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DacReport {
    pub clipped: usize,
    pub step: f64,
    /// Quantization noise per real component, SNU at the transmitter (Δ²/12).
    pub noise_var: f64,
}

impl DacReport {
    /// Budget entry; `eta` refers the transmitter-side noise to the channel output.
    pub fn budget(&self, eta: f64) -> NoiseBudget {
        NoiseBudget { xi_quant: eta * self.noise_var, ..Default::default() }
    }
}

/// Uniform midtread quantizer per real component with clipping at ±full_scale.
pub fn dac_quantize(frame: &SampleFrame, bits: u32, full_scale: f64) -> Result<(SampleFrame, DacReport)> {
    if !(4..=24).contains(&bits) {
        return domain(format!("bits {bits} outside [4, 24]"));
    }
    if !(full_scale > 0.0) {
        return domain("full scale must be positive");
    }
    let levels = 1i64 << (bits - 1);
    let step = full_scale / levels as f64;
    let (lo, hi) = (-levels, levels - 1);
    let mut clipped = 0usize;
    let mut q = |v: f32| -> f32 {
        let k = (v as f64 / step).round() as i64;
        let kc = k.clamp(lo, hi);
        if kc != k {
            clipped += 1;
        }
        (kc as f64 * step) as f32
    };
    let samples = frame.samples.iter().map(|c| Complex::new(q(c.re), q(c.im))).collect();
    let out = SampleFrame::new(samples, frame.sample_rate_hz, frame.unit, frame.frame_id)?;
    Ok((out, DacReport { clipped, step, noise_var: step * step / 12.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symbol_statistics() {
        let cfg = ModulationConfig::default();
        let n = 2_000_000;
        let f = generate_symbols(n, &cfg, 11).unwrap();
        let (vx, vp) = f.quadrature_variances();
        // 5σ band of an unbiased variance estimate: v·5·sqrt(2/(n−1)).
        let band = 8.41 * 5.0 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((vx - 8.41).abs() < band, "{vx}");
        assert!((vp - 8.41).abs() < band, "{vp}");
        assert_eq!(generate_symbols(1, &cfg, 1).unwrap().len(), 1);
        assert!(generate_symbols(0, &cfg, 1).is_err());
    }

    #[test]
    fn quadratures_uncorrelated() {
        let cfg = ModulationConfig { v_mod: 2.0, ..Default::default() };
        let n = 1_000_000;
        let f = generate_symbols(n, &cfg, 3).unwrap();
        let cov = f.symbols.iter().map(|c| c.re * c.im).sum::<f64>() / n as f64;
        assert!(cov.abs() < 5.0 * 2.0 / (n as f64).sqrt(), "{cov}");
    }

    #[test]
    fn rrc_nyquist_and_symmetry() {
        let h = rrc_taps(0.2, 20, 10).unwrap();
        assert_eq!(h.len(), 201);
        assert!((h.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..h.len() {
            assert_eq!(h[k].to_bits(), h[h.len() - 1 - k].to_bits());
        }
        // Self-convolution at symbol spacing, computed by direct summation.
        let n = h.len() as i64;
        let conv = |lag: i64| -> f64 {
            (0..n).filter(|&i| (0..n).contains(&(i + lag))).map(|i| h[i as usize] * h[(i + lag) as usize]).sum()
        };
        assert!((conv(0) - 1.0).abs() < 1e-12);
        for m in 1..20 {
            assert!(conv(10 * m).abs() < 1e-3, "lag {m}: {}", conv(10 * m));
        }
        assert!(rrc_taps(0.0, 20, 10).is_err());
        assert!(rrc_taps(1.2, 20, 10).is_err());
    }

    #[test]
    fn rrc_small_rolloff_approaches_sinc() {
        let h = rrc_taps(1e-6, 16, 4).unwrap();
        let half = (h.len() / 2) as f64;
        let mut s: Vec<f64> = (0..h.len())
            .map(|i| {
                let t = (i as f64 - half) / 4.0;
                if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) }
            })
            .collect();
        let e = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        s.iter_mut().for_each(|x| *x /= e);
        for (a, b) in h.iter().zip(&s) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn rrc_singular_points() {
        // rolloff 0.25 puts t = ±1 symbol on the 1/(4β) singularity.
        let h = rrc_taps(0.25, 8, 4).unwrap();
        assert!(h.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn pilot_only_is_pure_tone() {
        let cfg = ModulationConfig::default();
        let sym = SymbolFrame::new(vec![Complex64::new(0.0, 0.0); 100], cfg.baud_rate_hz);
        let w = synthesize_waveform(&sym, &cfg).unwrap();
        let a = cfg.pilot_abs_amplitude();
        for (n, s) in w.to_f64().iter().enumerate() {
            let want = a * carrier(cfg.pilot_freq_hz, cfg.sample_rate_hz, n);
            assert!((s - want).norm() < 1e-5 * a);
        }
    }

    #[test]
    fn single_symbol_peaks_at_carrier() {
        let cfg = ModulationConfig { pilot_amplitude: 0.0, ..Default::default() };
        let mut syms = vec![Complex64::new(0.0, 0.0); 100];
        syms[50] = Complex64::new(1.0, 0.0);
        let w = synthesize_waveform(&SymbolFrame::new(syms, cfg.baud_rate_hz), &cfg).unwrap();
        let mut x = w.to_f64();
        dsp::fft(&mut x);
        // The RRC spectrum is flat on top, so locate it by its power centroid.
        let n = x.len();
        let (mut num, mut den) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            num += dsp::bin_freq(k, n, cfg.sample_rate_hz) * v.norm_sqr();
            den += v.norm_sqr();
        }
        assert!((num / den - 1e8).abs() < 1e6, "{}", num / den);
    }

    #[test]
    fn signal_power_in_band() {
        let cfg = ModulationConfig { pilot_amplitude: 0.0, ..Default::default() };
        let syms = generate_symbols(20_000, &cfg, 9).unwrap();
        let mut x = synthesize_waveform(&syms, &cfg).unwrap().to_f64();
        dsp::fft(&mut x);
        let n = x.len();
        let (mut inband, mut total) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let p = v.norm_sqr();
            total += p;
            let f = dsp::bin_freq(k, n, cfg.sample_rate_hz);
            if (40e6..=160e6).contains(&f) {
                inband += p;
            }
        }
        assert!(inband / total > 0.99, "{}", inband / total);
    }

    #[test]
    fn pilot_leakage_into_signal_band() {
        let cfg = ModulationConfig::default();
        let sym = SymbolFrame::new(vec![Complex64::new(0.0, 0.0); 1000], cfg.baud_rate_hz);
        let mut x = synthesize_waveform(&sym, &cfg).unwrap().to_f64();
        dsp::fft(&mut x);
        let n = x.len();
        let (mut inband, mut total) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            total += v.norm_sqr();
            if (40e6..=160e6).contains(&dsp::bin_freq(k, n, cfg.sample_rate_hz)) {
                inband += v.norm_sqr();
            }
        }
        assert!(10.0 * (inband / total).log10() < -40.0);
    }

    #[test]
    fn loopback_nmse() {
        let cfg = ModulationConfig { pilot_amplitude: 0.0, ..Default::default() };
        let syms = generate_symbols(5000, &cfg, 4).unwrap();
        let bb = baseband_waveform(&syms.symbols, &cfg).unwrap();
        let rx = dsp::matched_filter_decimate(&bb, &cfg.taps().unwrap(), cfg.sps(), 0);
        let err: f64 = rx.iter().zip(&syms.symbols).map(|(a, b)| (a - b).norm_sqr()).sum();
        let pow: f64 = syms.symbols.iter().map(|b| b.norm_sqr()).sum();
        assert!(err / pow < 1e-4, "{}", err / pow);
    }

    #[test]
    fn band_overlap_rejected() {
        let cfg = ModulationConfig { pilot_freq_hz: 1.5e8, ..Default::default() };
        assert!(cfg.validate().is_err());
        let sym = SymbolFrame::new(vec![Complex64::new(0.0, 0.0); 10], 1e8);
        assert!(synthesize_waveform(&sym, &cfg).is_err());
    }

    #[test]
    fn dac_sqnr() {
        let n = 100_000;
        let fs = 1.0f64;
        let samples: Vec<Complex<f32>> = (0..n)
            .map(|i| {
                let v = 0.999 * (TAU * 0.01234 * i as f64 / fs).sin();
                Complex::new(v as f32, 0.0)
            })
            .collect();
        let f = SampleFrame::new(samples, 1e9, Unit::SnuNormalized, 0).unwrap();
        let (q, rep) = dac_quantize(&f, 16, 1.0).unwrap();
        assert_eq!(rep.clipped, 0);
        let (mut ps, mut pe) = (0.0, 0.0);
        for (a, b) in f.samples.iter().zip(&q.samples) {
            ps += (a.re as f64).powi(2);
            pe += (a.re as f64 - b.re as f64).powi(2);
        }
        let sqnr = 10.0 * (ps / pe).log10();
        assert!((sqnr - (6.02 * 16.0 + 1.76)).abs() < 3.0, "{sqnr}");
        assert!((rep.noise_var - rep.step * rep.step / 12.0).abs() < 1e-20);
    }

    #[test]
    fn dac_fixed_points_and_zero() {
        let step = 1.0 / 8.0;
        let vals: Vec<Complex<f32>> = (-8..8).map(|k| Complex::new((k as f64 * step) as f32, (-k as f64 * step).min(0.875) as f32)).collect();
        let f = SampleFrame::new(vals, 1e9, Unit::SnuNormalized, 0).unwrap();
        let (q, rep) = dac_quantize(&f, 4, 1.0).unwrap();
        assert_eq!(q, f);
        assert_eq!(rep.clipped, 0);
        let z = SampleFrame::new(vec![Complex::new(0.0, 0.0); 64], 1e9, Unit::SnuNormalized, 0).unwrap();
        let (qz, rz) = dac_quantize(&z, 12, 3.0).unwrap();
        assert_eq!(qz, z);
        assert_eq!(rz.clipped, 0);
        let big = SampleFrame::new(vec![Complex::new(5.0, -5.0)], 1e9, Unit::SnuNormalized, 0).unwrap();
        assert_eq!(dac_quantize(&big, 8, 1.0).unwrap().1.clipped, 2);
    }

    proptest! {
        #[test]
        fn shaping_preserves_power(seed in 0u64..500) {
            let cfg = ModulationConfig { v_mod: 1.0, ..Default::default() };
            let syms = generate_symbols_indexed(4000, &cfg, seed, 0);
            let bb = baseband_waveform(&syms.symbols, &cfg).unwrap();
            let p_out: f64 = bb.iter().map(|c| c.norm_sqr()).sum::<f64>();
            let p_in: f64 = syms.symbols.iter().map(|c| c.norm_sqr()).sum::<f64>();
            // Ratio of output to input energy fluctuates only through the ISI cross terms.
            prop_assert!((p_out / p_in - 1.0).abs() < 0.05);
        }
    }
}
