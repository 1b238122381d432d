//! Shared frame types, shot-noise-unit calibration and the noise budget.
//!
//! Convention: after calibration the vacuum variance of each quadrature is 1 SNU.

pub mod io;
pub mod rng;

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    AdcCounts,
    SnuNormalized,
}

impl Unit {
    pub fn code(self) -> u16 {
        match self {
            Unit::AdcCounts => 0,
            Unit::SnuNormalized => 1,
        }
    }

    pub fn from_code(c: u16) -> Option<Unit> {
        match c {
            0 => Some(Unit::AdcCounts),
            1 => Some(Unit::SnuNormalized),
            _ => None,
        }
    }
}

/// A frame of complex samples. Storage is single precision so that file round trips are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFrame {
    pub samples: Vec<Complex<f32>>,
    pub sample_rate_hz: f64,
    pub unit: Unit,
    pub frame_id: u64,
}

impl SampleFrame {
    pub fn new(samples: Vec<Complex<f32>>, sample_rate_hz: f64, unit: Unit, frame_id: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Contract("frame must hold at least one sample".into()));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::Contract(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        Ok(SampleFrame { samples, sample_rate_hz, unit, frame_id })
    }

    pub fn from_f64(samples: &[Complex64], sample_rate_hz: f64, unit: Unit, frame_id: u64) -> Result<Self> {
        let s = samples.iter().map(|c| Complex::new(c.re as f32, c.im as f32)).collect();
        Self::new(s, sample_rate_hz, unit, frame_id)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_f64(&self) -> Vec<Complex64> {
        self.samples.iter().map(|c| Complex64::new(c.re as f64, c.im as f64)).collect()
    }

    pub fn real_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.re as f64).collect()
    }

    /// Unbiased variance of the real component (the photocurrent for ADC frames).
    pub fn real_variance(&self) -> f64 {
        crate::stats::variance_iter(self.samples.iter().map(|c| c.re as f64))
    }
}

/// Complex quantum symbols α = x + ip in SNU, aligned to transmitted indices starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    pub baud_rate_hz: f64,
    pub start: usize,
}

impl SymbolFrame {
    pub fn new(symbols: Vec<Complex64>, baud_rate_hz: f64) -> Self {
        SymbolFrame { symbols, baud_rate_hz, start: 0 }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Unbiased per-quadrature variances (x, p).
    pub fn quadrature_variances(&self) -> (f64, f64) {
        let vx = crate::stats::variance_iter(self.symbols.iter().map(|c| c.re));
        let vp = crate::stats::variance_iter(self.symbols.iter().map(|c| c.im));
        (vx, vp)
    }

    pub fn slice(&self, from: usize, to: usize) -> SymbolFrame {
        SymbolFrame {
            symbols: self.symbols[from..to].to_vec(),
            baud_rate_hz: self.baud_rate_hz,
            start: self.start + from,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub vacuum_variance: f64,
    pub electronic_variance: f64,
    pub snu_scale: f64,
    /// +inf when the electronic variance is zero.
    pub clearance_db: f64,
}

impl CalibrationRecord {
    pub fn from_variances(vacuum: f64, electronic: f64) -> Result<Self> {
        let snu_scale = vacuum - electronic;
        if !(snu_scale > 0.0) || electronic < 0.0 {
            return Err(Error::Calibration { vacuum, electronic });
        }
        let clearance_db = if electronic == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (vacuum / electronic).log10()
        };
        Ok(CalibrationRecord { vacuum_variance: vacuum, electronic_variance: electronic, snu_scale, clearance_db })
    }

    pub fn clearance_unbounded(&self) -> bool {
        self.clearance_db.is_infinite()
    }

    /// Electronic noise in SNU as it appears per quadrature of the real photocurrent.
    pub fn electronic_snu(&self) -> f64 {
        self.electronic_variance / self.snu_scale
    }

    /// Rescale an ADC frame into shot-noise units.
    pub fn normalize(&self, frame: &SampleFrame) -> Result<SampleFrame> {
        if frame.unit != Unit::AdcCounts {
            return Err(Error::Contract("normalize expects an adc_counts frame".into()));
        }
        let k = (1.0 / self.snu_scale.sqrt()) as f32;
        let samples = frame.samples.iter().map(|c| c * k).collect();
        SampleFrame::new(samples, frame.sample_rate_hz, Unit::SnuNormalized, frame.frame_id)
    }
}

/// snu_scale = mean vacuum variance − mean electronic variance, both per frame, ADC counts².
pub fn snu_calibrate(vacuum_frames: &[SampleFrame], electronic_frames: &[SampleFrame]) -> Result<CalibrationRecord> {
    if vacuum_frames.is_empty() || electronic_frames.is_empty() {
        return Err(Error::Contract("calibration needs vacuum and electronic frames".into()));
    }
    if vacuum_frames.iter().chain(electronic_frames).any(|f| f.unit != Unit::AdcCounts) {
        return Err(Error::Contract("calibration frames must be in adc_counts".into()));
    }
    let mean_var = |fs: &[SampleFrame]| fs.iter().map(|f| f.real_variance()).sum::<f64>() / fs.len() as f64;
    CalibrationRecord::from_variances(mean_var(vacuum_frames), mean_var(electronic_frames))
}

/// Excess-noise contributions in SNU. Additive by construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBudget {
    pub xi_rin: f64,
    pub xi_mod: f64,
    pub xi_quant: f64,
    pub xi_ram: f64,
    pub xi_rpn: f64,
    pub xi_other: f64,
}

impl NoiseBudget {
    pub fn total(&self) -> f64 {
        self.xi_rin + self.xi_mod + self.xi_quant + self.xi_ram + self.xi_rpn + self.xi_other
    }

    pub fn is_valid(&self) -> bool {
        [self.xi_rin, self.xi_mod, self.xi_quant, self.xi_ram, self.xi_rpn, self.xi_other]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real_frame(vals: &[f64]) -> SampleFrame {
        let s = vals.iter().map(|&v| Complex::new(v as f32, 0.0)).collect();
        SampleFrame::new(s, 1e9, Unit::AdcCounts, 0).unwrap()
    }

    #[test]
    fn calibration_examples() {
        let r = CalibrationRecord::from_variances(10.0, 0.3162).unwrap();
        assert!((r.snu_scale - 9.6838).abs() < 1e-12);
        assert!((r.clearance_db - 15.0).abs() < 1e-3);
        let r = CalibrationRecord::from_variances(1.0, 0.0).unwrap();
        assert_eq!(r.snu_scale, 1.0);
        assert!(r.clearance_unbounded());
        assert!(matches!(CalibrationRecord::from_variances(0.2, 0.3), Err(Error::Calibration { .. })));
    }

    #[test]
    fn calibrate_frames() {
        let vac = real_frame(&[3.0, -3.0, 3.0, -3.0]);
        let ele = real_frame(&[1.0, -1.0, 1.0, -1.0]);
        let r = snu_calibrate(&[vac.clone()], &[ele.clone()]).unwrap();
        assert!((r.snu_scale - (12.0 - 4.0 / 3.0)).abs() < 1e-9);
        assert!(snu_calibrate(&[ele], &[vac]).is_err());
        assert!(snu_calibrate(&[], &[real_frame(&[1.0, 2.0])]).is_err());
    }

    #[test]
    fn frame_contract() {
        assert!(SampleFrame::new(vec![], 1e9, Unit::AdcCounts, 0).is_err());
        assert!(SampleFrame::new(vec![Complex::new(0.0, 0.0)], 0.0, Unit::AdcCounts, 0).is_err());
    }

    proptest! {
        #[test]
        fn budget_total_is_sum(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, d in 0.0..1.0f64, e in 0.0..1.0f64, f in 0.0..1.0f64) {
            let nb = NoiseBudget { xi_rin: a, xi_mod: b, xi_quant: c, xi_ram: d, xi_rpn: e, xi_other: f };
            prop_assert_eq!(nb.total(), a + b + c + d + e + f);
        }

        #[test]
        fn calibration_scales_quadratically(c in 0.1..100.0f64, seed in 0u64..1000) {
            let mut g = rng::Gaussian::new(seed, rng::Stream::Test, 0);
            let vac: Vec<f64> = (0..512).map(|_| 2.0 * g.sample()).collect();
            let ele: Vec<f64> = (0..512).map(|_| 0.5 * g.sample()).collect();
            let scale = |xs: &[f64], k: f64| xs.iter().map(|x| x * k).collect::<Vec<_>>();
            let r1 = snu_calibrate(&[real_frame(&vac)], &[real_frame(&ele)]).unwrap();
            let r2 = snu_calibrate(&[real_frame(&scale(&vac, c))], &[real_frame(&scale(&ele, c))]).unwrap();
            prop_assert!((r2.snu_scale / r1.snu_scale / (c * c) - 1.0).abs() < 1e-5);
            prop_assert!((r2.clearance_db - r1.clearance_db).abs() < 1e-4);
        }
    }
}
