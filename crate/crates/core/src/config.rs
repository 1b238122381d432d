//! Run configuration: every knob of the chain, grouped by stage, in TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, DetectorModel};
use crate::error::{config, Error, Result};
use crate::recon::ReconConfig;
use crate::rx::RxConfig;
use crate::security::{OperatingTable, SecurityParams};
use crate::tx::ModulationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Table1,
    Quick,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Preset::Table1),
            "quick" => Ok(Preset::Quick),
            other => config(format!("unknown preset {other:?} (expected table1 or quick)")),
        }
    }
}

/// Where the key-rate bounds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    /// Worst-case η and ξ given in the config, evaluated on `n_symbols`.
    Declared,
    /// Confidence bounds estimated from the simulated symbols.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub samples_per_frame: usize,
    pub signal_frames: usize,
    pub vacuum_frames: usize,
    pub electronic_frames: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig { samples_per_frame: 1_000_000, signal_frames: 100, vacuum_frames: 16, electronic_frames: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityConfig {
    pub source: BoundSource,
    /// Declared worst-case transmittance.
    pub eta: f64,
    /// Declared worst-case excess noise, SNU at the channel output.
    pub xi: f64,
    /// Symbols in the session the declared bounds describe.
    pub n_symbols: u64,
    pub beta: f64,
    pub fer: f64,
    pub n_block: Option<u64>,
    pub delta_fail: f64,
    /// (V_mod, β, FER) points used by modulation-variance sweeps.
    pub operating_points: Vec<(f64, f64, f64)>,
}

impl Default for SecurityConfig {
    fn default() -> Self {
        let p = SecurityParams::default();
        SecurityConfig {
            source: BoundSource::Declared,
            eta: 0.028,
            xi: 0.212e-3,
            n_symbols: 950_000_000,
            beta: p.beta,
            fer: p.fer,
            n_block: p.n_block,
            delta_fail: p.delta_fail,
            operating_points: OperatingTable::paper().points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconStage {
    pub enabled: bool,
    /// Puncture towards this fraction of the virtual-channel capacity at the measured SNR.
    pub beta_design: f64,
    pub code: ReconConfig,
}

impl Default for ReconStage {
    fn default() -> Self {
        ReconStage { enabled: true, beta_design: 0.9, code: ReconConfig { blocks: 16, ..Default::default() } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub tx: ModulationConfig,
    pub channel: ChannelParams,
    pub detector: DetectorModel,
    pub rx: RxConfig,
    pub estimation: EstimationConfig,
    pub security: SecurityConfig,
    pub reconciliation: ReconStage,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tx = ModulationConfig::default();
        let mut channel = ChannelParams::default();
        channel.match_modulation(&tx);
        channel.xi_injected.xi_other = 0.212e-3;
        RunConfig {
            seed: 1,
            workers: 0,
            tx,
            channel,
            detector: DetectorModel::default(),
            rx: RxConfig::default(),
            estimation: EstimationConfig::default(),
            security: SecurityConfig::default(),
            reconciliation: ReconStage::default(),
        }
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Table1 => RunConfig::default(),
            Preset::Quick => {
                let mut c = RunConfig::default();
                c.estimation = EstimationConfig {
                    samples_per_frame: 100_000,
                    signal_frames: 100,
                    vacuum_frames: 8,
                    electronic_frames: 2,
                };
                c.rx.sync_ref_symbols = 10_000;
                c.reconciliation.code.blocks = 4;
                c
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut c: RunConfig = toml::from_str(text)?;
        c.channel.match_modulation(&c.tx);
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn security_params(&self) -> SecurityParams {
        SecurityParams {
            beta: self.security.beta,
            fer: self.security.fer,
            n_block: self.security.n_block,
            delta_fail: self.security.delta_fail,
            baud_hz: self.tx.baud_rate_hz,
        }
    }

    /// Symbols carried by one simulated frame.
    pub fn symbols_per_frame(&self) -> usize {
        self.estimation.samples_per_frame / self.tx.sps()
    }

    /// Cross-stage checks, run before anything is simulated.
    pub fn validate(&self) -> Result<()> {
        self.tx.validate()?;
        self.channel.validate()?;
        self.detector.validate()?;
        self.rx.validate(&self.tx)?;
        self.security_params().validate()?;
        if self.reconciliation.enabled {
            self.reconciliation.code.validate()?;
            if !(self.reconciliation.beta_design > 0.0 && self.reconciliation.beta_design <= 1.0) {
                return config("beta_design must lie in (0, 1]");
            }
        }
        let ch = &self.channel;
        if ch.baud_rate_hz != self.tx.baud_rate_hz || ch.signal_center_hz != self.tx.signal_center_hz {
            return config("channel noise shaping disagrees with the modulation band");
        }
        if (ch.freq_offset_hz - self.rx.expected_offset_hz).abs() > self.rx.pilot_search_hz {
            return config(format!(
                "frequency offset {:.4e} Hz outside the pilot search window {:.4e} ± {:.1e} Hz",
                ch.freq_offset_hz, self.rx.expected_offset_hz, self.rx.pilot_search_hz
            ));
        }
        let e = &self.estimation;
        let sps = self.tx.sps();
        if e.samples_per_frame == 0 || e.samples_per_frame % sps != 0 {
            return config("samples_per_frame must be a positive multiple of the samples per symbol");
        }
        if self.rx.sync_ref_symbols > self.symbols_per_frame() {
            return config("sync reference longer than a frame");
        }
        if e.signal_frames == 0 || e.vacuum_frames < 2 || e.electronic_frames == 0 {
            return config("need signal frames, at least two vacuum frames and one electronic frame");
        }
        let s = &self.security;
        if s.operating_points.is_empty() || s.operating_points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return config("operating points must be non-empty and sorted by V_mod");
        }
        if !(s.eta > 0.0 && s.eta <= 1.0 && s.xi >= 0.0 && s.n_symbols > 0) {
            return config("declared bounds need η in (0, 1], ξ ≥ 0 and a positive symbol count");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        RunConfig::preset(Preset::Table1).validate().unwrap();
        RunConfig::preset(Preset::Quick).validate().unwrap();
    }

    #[test]
    fn quick_preset_sizes() {
        let c = RunConfig::preset(Preset::Quick);
        assert_eq!(c.estimation.samples_per_frame, 100_000);
        assert_eq!(c.symbols_per_frame() * c.estimation.signal_frames, 1_000_000);
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::preset(Preset::Quick);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c = RunConfig::from_toml("seed = 9\n[channel]\nlength_km = 50.0\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.channel.length_km, 50.0);
        assert_eq!(c.tx, ModulationConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::from_toml("sede = 9\n").is_err());
        assert!(RunConfig::from_toml("[security]\nbeat = 0.9\n").is_err());
    }

    #[test]
    fn inconsistent_plans_rejected() {
        let mut c = RunConfig::default();
        c.channel.freq_offset_hz = 1e8;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = RunConfig::default();
        c.estimation.samples_per_frame = 12_345;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.security.fer = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn preset_names() {
        assert_eq!("quick".parse::<Preset>().unwrap(), Preset::Quick);
        assert!("full".parse::<Preset>().is_err());
    }
}
