//! End-to-end runs and parameter sweeps: simulate, recover, estimate, reconcile, rate.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{adc, electronic_frame, simulate_signal_frame, vacuum_frame};
use crate::config::{BoundSource, RunConfig};
use crate::error::{config, Error, Result};
use crate::estimate::{cumulative_noise_trace, widen_for_calibration, worst_case_bounds, write_trace, LinkEstimate, LinkStats};
use crate::recon::{self, LdpcCode, MetDistribution};
use crate::rx::{self, RxReport, WhiteningFilter};
use crate::security::{self, LinkModel, OperatingTable, RateMode};
use crate::snu::rng::{stream, Stream};
use crate::snu::{snu_calibrate, CalibrationRecord, SampleFrame};

#[derive(Debug, Clone)]
pub struct Calibration {
    pub record: CalibrationRecord,
    pub whitening: WhiteningFilter,
    /// Relative standard error of the whitened shot-noise level in the signal band.
    pub level_rel_std: f64,
}

#[derive(Serialize)]
struct CalibrationFile<'a> {
    #[serde(flatten)]
    record: &'a CalibrationRecord,
    level_rel_std: f64,
}

/// Vacuum and electronic-noise measurements: SNU scale and whitening filter.
pub fn calibrate(cfg: &RunConfig) -> Result<Calibration> {
    let n = cfg.estimation.samples_per_frame;
    let fs = cfg.tx.sample_rate_hz;
    let det = &cfg.detector;
    let take = |k: usize, base: u64, electronic: bool| -> Result<Vec<SampleFrame>> {
        (0..k as u64)
            .into_par_iter()
            .map(|i| {
                let f = if electronic {
                    electronic_frame(n, fs, det, cfg.seed, base + i)?
                } else {
                    vacuum_frame(n, fs, det, cfg.seed, base + i)?
                };
                Ok(adc(&f, det)?.0)
            })
            .collect()
    };
    let go = || -> Result<Calibration> {
        let vac = take(cfg.estimation.vacuum_frames, 1_000_000, false)?;
        let ele = take(cfg.estimation.electronic_frames, 2_000_000, true)?;
        let record = snu_calibrate(&vac, &ele)?;
        let n_avg = vac.len().min(cfg.rx.whitening_frames);
        let whitening = rx::whitening::whitening_estimate_seg(&vac, n_avg, cfg.rx.whitening_segment)?;
        let carrier = cfg.tx.signal_center_hz + cfg.rx.expected_offset_hz;
        let levels: Vec<f64> = vac
            .par_iter()
            .map(|f| {
                let y = rx::noise_symbols(f, &record, &whitening, &cfg.tx, carrier)?;
                Ok(y.iter().map(|z| z.norm_sqr()).sum::<f64>() / (2 * y.len()) as f64)
            })
            .collect::<Result<_>>()?;
        let k = levels.len() as f64;
        let mean = levels.iter().sum::<f64>() / k;
        let sd = (levels.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        Ok(Calibration { record, whitening, level_rel_std: sd / mean / k.sqrt() })
    };
    go().map_err(|e| e.in_stage("calibration"))
}

pub fn write_calibration(dir: &Path, cal: &Calibration) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("calibration.toml"), toml::to_string(&CalibrationFile { record: &cal.record, level_rel_std: cal.level_rel_std }).expect("record serializes"))?;
    let mut w = csv::Writer::from_path(dir.join("whitening.csv"))?;
    w.write_record(["bin", "gain_re", "gain_im"])?;
    for (k, g) in cal.whitening.freq_response_inverse.iter().enumerate() {
        w.write_record([k.to_string(), format!("{:.9e}", g.re), format!("{:.9e}", g.im)])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-frame outcome of the receiver chain.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub report: RxReport,
    pub stats: LinkStats,
    pub estimate: LinkEstimate,
    /// Residual phase variance against the simulated truth.
    pub v_rpn_true: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub frames: Vec<FrameResult>,
    pub pooled: LinkEstimate,
    /// Mean UKF self-reported residual phase variance.
    pub v_rpn_ukf: f64,
    pub v_rpn_true: f64,
    /// Alice's and Bob's symbols, kept from the first frames for reconciliation.
    pub alice: Vec<Complex64>,
    pub bob: Vec<Complex64>,
}

/// Simulate all signal frames, run the receiver and pool the link statistics.
pub fn simulate(cfg: &RunConfig, cal: &Calibration, keep_symbols: usize) -> Result<Simulation> {
    let spf = cfg.symbols_per_frame();
    let (tau, t, delta) = (cfg.detector.tau, cfg.detector.t_noise, cfg.security.delta_fail);
    let per_frame: Vec<(FrameResult, Option<(Vec<Complex64>, Vec<Complex64>)>)> = (0..cfg.estimation.signal_frames as u64)
        .into_par_iter()
        .map(|i| {
            let (counts, syms, trace) = simulate_signal_frame(
                &cfg.tx,
                &cfg.channel,
                &cfg.detector,
                cfg.estimation.samples_per_frame,
                cfg.seed,
                i,
            )
            .map_err(|e| Error::InFrame { frame_id: i, source: Box::new(e) }.in_stage("channel"))?;
            let out = rx::recover_symbols(&counts, &cal.record, &cal.whitening, &cfg.tx, &cfg.rx, &syms)
                .map_err(|e| e.in_stage("rx-dsp"))?;
            let stats = LinkStats::from_pairs(&syms.symbols, &out.symbols.symbols)?;
            let estimate = stats
                .estimate(tau, t, delta)
                .and_then(|e| worst_case_bounds(&e))
                .map_err(|e| Error::InFrame { frame_id: i, source: Box::new(e) }.in_stage("estimation"))?;
            let v_rpn_true = rx::v_rpn_against_truth(&out.pilot_phase, &trace, cfg.tx.pilot_freq_hz);
            let keep = ((i as usize) * spf < keep_symbols).then(|| (syms.symbols, out.symbols.symbols));
            Ok((FrameResult { report: out.report, stats, estimate, v_rpn_true }, keep))
        })
        .collect::<Result<_>>()?;
    let mut frames = Vec::with_capacity(per_frame.len());
    let (mut alice, mut bob) = (Vec::new(), Vec::new());
    let mut pooled = LinkStats::default();
    for (f, keep) in per_frame {
        pooled = pooled.merge(f.stats);
        if let Some((a, b)) = keep {
            alice.extend(a);
            bob.extend(b);
        }
        frames.push(f);
    }
    alice.truncate(keep_symbols);
    bob.truncate(keep_symbols);
    let pooled = pooled
        .estimate(tau, t, delta)
        .and_then(|e| worst_case_bounds(&e))
        .and_then(|e| widen_for_calibration(&e, cal.level_rel_std))
        .map_err(|e| e.in_stage("estimation"))?;
    let nf = frames.len() as f64;
    let v_rpn_ukf = frames.iter().map(|f| f.report.v_rpn_self).sum::<f64>() / nf;
    let v_rpn_true = frames.iter().map(|f| f.v_rpn_true).sum::<f64>() / nf;
    Ok(Simulation { frames, pooled, v_rpn_ukf, v_rpn_true, alice, bob })
}

/// Key-rate evaluation for one set of bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub eta: f64,
    pub xi: f64,
    pub n_symbols: u64,
    pub i_ab: f64,
    pub chi_e: f64,
    pub delta_n: f64,
    pub skr_asymptotic_bps: f64,
    pub skr_finite_bps: f64,
}

fn rate_summary(link: &LinkEstimate, cfg: &RunConfig) -> Result<RateSummary> {
    let sec = cfg.security_params();
    let r = security::security_report(link, &sec, cfg.tx.v_mod).map_err(|e| e.in_stage("security"))?;
    Ok(RateSummary {
        eta: link.eta_low,
        xi: link.xi_up,
        n_symbols: link.n_used,
        i_ab: r.i_ab,
        chi_e: r.chi_e,
        delta_n: r.delta_n,
        skr_asymptotic_bps: r.skr_asymptotic_bps,
        skr_finite_bps: r.skr_finite_bps,
    })
}

/// Reconciliation of the simulated symbols followed by privacy amplification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconSummary {
    pub blocks: usize,
    pub failures: usize,
    /// Converged blocks whose bits differ from Bob's; discarded like failures.
    pub disagreements: usize,
    pub snr: f64,
    pub rate_effective: f64,
    pub beta: f64,
    pub fer: f64,
    pub key_bits: usize,
}

/// Reverse reconciliation of Bob's measured symbols, then Toeplitz hashing of the agreed bits.
///
/// Secret length per agreed block is k − (symbols)·(χ_E + Δ) from the chosen bounds.
pub fn reconcile_and_amplify(
    cfg: &RunConfig,
    alice: &[Complex64],
    bob: &[Complex64],
    link: &LinkEstimate,
    leak_per_symbol: f64,
) -> Result<(ReconSummary, Vec<u8>)> {
    let st = &cfg.reconciliation;
    let rc = &st.code;
    let base = LdpcCode::from_met(&MetDistribution::demo_rate_005(), rc.block_len, rc.code_seed)?;
    let v = cfg.tx.v_mod;
    let g = link.gain;
    let noise_var = link.residual_var / (g * g * v);
    let snr = 1.0 / noise_var;
    let k = base.info_bits() as f64;
    let max_rate = k / (base.block_len - base.punct_candidates.len()) as f64;
    let target = (st.beta_design * recon::md_virtual_capacity(snr, rc.dim)).clamp(base.code_rate, max_rate);
    let code = recon::rate_adapt_to(&base, target, cfg.seed)?;
    let nt = code.block_len - code.n_punctured();
    let a: Vec<f64> = alice.iter().flat_map(|z| [z.re, z.im]).map(|x| x / v.sqrt()).collect();
    let b: Vec<f64> = bob.iter().flat_map(|z| [z.re, z.im]).map(|y| y / (g * v.sqrt())).collect();
    let blocks = rc.blocks.min(a.len() / nt);
    let outcomes: Vec<recon::BlockOutcome> = (0..blocks)
        .into_par_iter()
        .map(|i| {
            let r = i * nt..(i + 1) * nt;
            recon::reconcile_block(&code, &a[r.clone()], &b[r], noise_var, rc.dim, rc.max_iters, cfg.seed, i as u64)
        })
        .collect::<Result<_>>()?;
    let mut agreed = Vec::new();
    let (mut failures, mut disagreements) = (0, 0);
    for o in &outcomes {
        if !o.converged {
            failures += 1;
        } else if !o.agree {
            disagreements += 1;
        } else {
            agreed.extend_from_slice(&o.bob_bits);
        }
    }
    let good = blocks - failures - disagreements;
    let secret = good as f64 * (code.info_bits() as f64 - (nt as f64 / 2.0) * leak_per_symbol);
    let out_len = (secret.floor().max(0.0) as usize).min(agreed.len());
    let key = if out_len == 0 {
        Vec::new()
    } else {
        let mut rng = stream(cfg.seed, Stream::Privacy, 0);
        let mut seed_bits = Vec::with_capacity(agreed.len() + out_len - 1);
        while seed_bits.len() < agreed.len() + out_len - 1 {
            let w = rng.next_u64();
            for j in 0..64 {
                seed_bits.push(((w >> j) & 1) as u8);
            }
        }
        seed_bits.truncate(agreed.len() + out_len - 1);
        recon::toeplitz_extract(&agreed, &seed_bits, out_len)?
    };
    let cap = recon::md_virtual_capacity(snr, rc.dim);
    let summary = ReconSummary {
        blocks,
        failures,
        disagreements,
        snr,
        rate_effective: code.effective_rate(),
        beta: code.effective_rate() / cap,
        fer: if blocks == 0 { 0.0 } else { (failures + disagreements) as f64 / blocks as f64 },
        key_bits: key.len(),
    };
    Ok((summary, key))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub source: BoundSource,
    pub length_km: f64,
    pub eta_true: f64,
    pub xi_injected: f64,
    pub symbols_simulated: u64,
    pub calibration_rel_std: f64,
    pub eta_hat: f64,
    pub xi_hat: f64,
    pub eta_low: f64,
    pub xi_up: f64,
    pub v_rpn_ukf: f64,
    pub v_rpn_true: f64,
    pub xi_rpn_model: f64,
    pub declared: RateSummary,
    pub measured: RateSummary,
    pub recon: Option<ReconSummary>,
}

impl RunSummary {
    /// Finite-size rate under the configured bound source.
    pub fn headline_skr(&self) -> f64 {
        match self.source {
            BoundSource::Declared => self.declared.skr_finite_bps,
            BoundSource::Measured => self.measured.skr_finite_bps,
        }
    }

    fn headline(&self) -> &RateSummary {
        match self.source {
            BoundSource::Declared => &self.declared,
            BoundSource::Measured => &self.measured,
        }
    }

    /// Two-column table, one quantity per row.
    pub fn rows(&self, cfg: &RunConfig) -> Vec<(String, String)> {
        let mut r: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| r.push((k.to_string(), v));
        put("baud_hz", format!("{:e}", cfg.tx.baud_rate_hz));
        put("v_mod_snu", format!("{}", cfg.tx.v_mod));
        put("tau", format!("{}", cfg.detector.tau));
        put("t_msnu", format!("{:.4}", cfg.detector.t_noise * 1e3));
        put("length_km", format!("{}", self.length_km));
        put("eta_true", format!("{:.6}", self.eta_true));
        put("xi_injected_msnu", format!("{:.4}", self.xi_injected * 1e3));
        put("symbols_simulated", self.symbols_simulated.to_string());
        put("calibration_rel_std", format!("{:.3e}", self.calibration_rel_std));
        put("eta_hat", format!("{:.6}", self.eta_hat));
        put("eta_low", format!("{:.6}", self.eta_low));
        put("xi_hat_msnu", format!("{:.4}", self.xi_hat * 1e3));
        put("xi_up_msnu", format!("{:.4}", self.xi_up * 1e3));
        put("v_rpn_ukf_rad2", format!("{:.4e}", self.v_rpn_ukf));
        put("v_rpn_true_rad2", format!("{:.4e}", self.v_rpn_true));
        put("xi_rpn_model_msnu", format!("{:.4}", self.xi_rpn_model * 1e3));
        put("beta", format!("{}", cfg.security.beta));
        put("fer", format!("{}", cfg.security.fer));
        put("bound_source", format!("{:?}", self.source).to_lowercase());
        let h = self.headline();
        put("eta_used", format!("{:.6}", h.eta));
        put("xi_used_msnu", format!("{:.4}", h.xi * 1e3));
        put("n_symbols_used", h.n_symbols.to_string());
        put("i_ab", format!("{:.6}", h.i_ab));
        put("chi_e", format!("{:.6}", h.chi_e));
        put("delta_n", format!("{:.6e}", h.delta_n));
        put("skr_asymptotic_bps", format!("{:.1}", h.skr_asymptotic_bps));
        put("skr_finite_bps", format!("{:.1}", h.skr_finite_bps));
        put("measured_skr_asymptotic_bps", format!("{:.1}", self.measured.skr_asymptotic_bps));
        put("measured_skr_finite_bps", format!("{:.1}", self.measured.skr_finite_bps));
        if let Some(rc) = &self.recon {
            put("recon_blocks", rc.blocks.to_string());
            put("recon_snr_db", format!("{:.3}", 10.0 * rc.snr.log10()));
            put("recon_rate", format!("{:.5}", rc.rate_effective));
            put("recon_beta", format!("{:.4}", rc.beta));
            put("recon_fer", format!("{:.4}", rc.fer));
            put("recon_disagreements", rc.disagreements.to_string());
            put("key_bits", rc.key_bits.to_string());
        }
        r
    }
}

fn write_rows(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["quantity", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

/// Bits packed eight per byte, least significant first.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |a, (i, &b)| a | (b & 1) << i)).collect()
}

/// Run `f` on a pool of `workers` threads, or on the global pool when `workers` is 0.
pub fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Full chain into `out`: calibration, per-frame DSP report, noise trace, summary, key.
pub fn run_experiment(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    in_pool(cfg.workers, || run_inner(cfg, out))?
}

fn run_inner(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    let cal = calibrate(cfg)?;
    write_calibration(out, &cal)?;

    let keep = if cfg.reconciliation.enabled {
        cfg.reconciliation.code.blocks * cfg.reconciliation.code.block_len / 2
    } else {
        0
    };
    let sim = simulate(cfg, &cal, keep)?;
    let reports: Vec<RxReport> = sim.frames.iter().map(|f| f.report).collect();
    rx::write_reports(&out.join("dsp_report.csv"), &reports)?;
    let per_frame: Vec<LinkEstimate> = sim.frames.iter().map(|f| f.estimate).collect();
    write_trace(&out.join("noise_trace.csv"), &cumulative_noise_trace(&per_frame)?)?;

    let det = &cfg.detector;
    let declared_link = LinkEstimate::from_model(
        cfg.security.eta,
        cfg.security.xi,
        det.tau,
        det.t_noise,
        cfg.security.n_symbols,
        cfg.security.delta_fail,
    );
    let declared = rate_summary(&declared_link, cfg)?;
    let measured = rate_summary(&sim.pooled, cfg)?;
    let eta_true = cfg.channel.eta();
    let mut summary = RunSummary {
        source: cfg.security.source,
        length_km: cfg.channel.length_km,
        eta_true,
        xi_injected: cfg.channel.xi_injected.total(),
        symbols_simulated: sim.pooled.n_used,
        calibration_rel_std: cal.level_rel_std,
        eta_hat: sim.pooled.eta_hat,
        xi_hat: sim.pooled.xi_hat,
        eta_low: sim.pooled.eta_low,
        xi_up: sim.pooled.xi_up,
        v_rpn_ukf: sim.v_rpn_ukf,
        v_rpn_true: sim.v_rpn_true,
        xi_rpn_model: security::xi_rpn_model(det.tau * eta_true, cfg.tx.v_mod, sim.v_rpn_ukf),
        declared,
        measured,
        recon: None,
    };
    let mut key = Vec::new();
    if cfg.reconciliation.enabled {
        let h = summary.headline();
        let (rs, k) = reconcile_and_amplify(cfg, &sim.alice, &sim.bob, &sim.pooled, h.chi_e + h.delta_n)
            .map_err(|e| e.in_stage("reconciliation"))?;
        summary.recon = Some(rs);
        key = k;
    }
    fs::write(out.join("key.bin"), pack_bits(&key))?;
    write_rows(&out.join("summary.csv"), &summary.rows(cfg))?;
    let manifest = RunManifest {
        kind: "run".into(),
        seed: cfg.seed,
        outputs: ["config.toml", "calibration.toml", "whitening.csv", "dsp_report.csv", "noise_trace.csv", "summary.csv", "key.bin"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        key_bits: key.len(),
        skr_bps: summary.headline_skr(),
    };
    fs::write(out.join("manifest.toml"), toml::to_string(&manifest).expect("manifest serializes"))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub key_bits: usize,
    pub skr_bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Distance,
    VMod,
    PilotSnr,
    Linewidth,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(Axis::Distance),
            "v_mod" => Ok(Axis::VMod),
            "pilot_snr" => Ok(Axis::PilotSnr),
            "linewidth" => Ok(Axis::Linewidth),
            other => config(format!("unknown axis {other:?} (distance, v_mod, pilot_snr, linewidth)")),
        }
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Distance => "distance",
            Axis::VMod => "v_mod",
            Axis::PilotSnr => "pilot_snr",
            Axis::Linewidth => "linewidth",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Axis::Distance => "skr_vs_distance.csv",
            Axis::VMod => "vmod_sweep.csv",
            Axis::PilotSnr => "pilot_snr_sweep.csv",
            Axis::Linewidth => "linewidth_sweep.csv",
        }
    }

    pub fn header(self) -> Vec<&'static str> {
        let mut h = match self {
            Axis::Distance => vec!["length_km", "eta", "i_ab", "chi_e", "skr_asymptotic_bps", "skr_finite_bps"],
            Axis::VMod => vec!["v_mod", "beta", "fer", "i_ab", "chi_e", "skr_asymptotic_bps"],
            Axis::PilotSnr | Axis::Linewidth => vec![
                if self == Axis::PilotSnr { "pilot_db" } else { "linewidth_hz" },
                "v_rpn_ukf",
                "v_rpn_true",
                "eta_hat",
                "xi_hat_msnu",
                "residual_var",
                "xi_rpn_model_msnu",
            ],
        };
        h.push("status");
        h
    }

    fn simulated(self) -> bool {
        matches!(self, Axis::PilotSnr | Axis::Linewidth)
    }
}

/// Grid from "a,b,c" or "start:step:stop" (inclusive). An empty string is an empty grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad grid value {t:?}")));
    if s.contains(':') {
        let p: Vec<&str> = s.split(':').collect();
        if p.len() != 3 {
            return config("range grid needs start:step:stop");
        }
        let (a, d, b) = (num(p[0])?, num(p[1])?, num(p[2])?);
        if !(d > 0.0) || b < a {
            return config("range grid needs a positive step and stop ≥ start");
        }
        let n = ((b - a) / d + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * d).collect());
    }
    s.split(',').map(num).collect()
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

/// Cells of one grid point, status excluded.
fn sweep_point(cfg: &RunConfig, cal: Option<&Calibration>, axis: Axis, value: f64) -> Result<Vec<String>> {
    let sec = cfg.security_params();
    let det = &cfg.detector;
    match axis {
        Axis::Distance => {
            let model = LinkModel {
                v_mod: cfg.tx.v_mod,
                tau: det.tau,
                t: det.t_noise,
                xi_out: cfg.security.xi,
                coupling: cfg.channel.coupling_transmittance,
                atten_db_per_km: cfg.channel.atten_db_per_km,
                n_symbols: cfg.security.n_symbols,
            };
            if value < 0.0 {
                return config(format!("negative length {value}"));
            }
            let r = security::security_report(&model.link(value, sec.delta_fail), &sec, model.v_mod)?;
            Ok(vec![sci(value), sci(model.eta(value)), sci(r.i_ab), sci(r.chi_e), sci(r.skr_asymptotic_bps), sci(r.skr_finite_bps)])
        }
        Axis::VMod => {
            let table = OperatingTable { points: cfg.security.operating_points.clone() };
            let link = LinkEstimate::from_model(
                cfg.security.eta,
                cfg.security.xi,
                det.tau,
                det.t_noise,
                cfg.security.n_symbols,
                sec.delta_fail,
            );
            let (beta, fer) = table.at(value);
            let s = security::SecurityParams { beta, fer, ..sec };
            let r = security::secret_key_rate(&link, &s, value, RateMode::Asymptotic)?;
            Ok(vec![sci(value), sci(beta), sci(fer), sci(r.i_ab), sci(r.chi_e), sci(r.skr_bps)])
        }
        Axis::PilotSnr | Axis::Linewidth => {
            let mut c = cfg.clone();
            if axis == Axis::PilotSnr {
                c.tx.pilot_amplitude = 10f64.powf(value / 20.0);
            } else {
                if value < 0.0 {
                    return config(format!("negative linewidth {value}"));
                }
                c.channel.linewidth_tx_hz = value / 2.0;
                c.channel.linewidth_rx_hz = value / 2.0;
                c.rx.linewidth_hint_hz = value.max(1.0);
            }
            c.validate()?;
            let cal = cal.expect("simulated axes are calibrated");
            let sim = simulate(&c, cal, 0)?;
            let p = &sim.pooled;
            let model = security::xi_rpn_model(det.tau * c.channel.eta(), c.tx.v_mod, sim.v_rpn_ukf);
            Ok(vec![
                sci(value),
                sci(sim.v_rpn_ukf),
                sci(sim.v_rpn_true),
                sci(p.eta_hat),
                sci(p.xi_hat * 1e3),
                sci(p.residual_var),
                sci(model * 1e3),
            ])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub csv: PathBuf,
    pub rows: usize,
    /// Points taken from the manifest of an earlier, interrupted sweep.
    pub resumed: usize,
    pub failures: usize,
    /// False when `stop_after` cut the sweep short.
    pub complete: bool,
}

fn grid_line(grid: &[f64]) -> String {
    grid.iter().map(|g| format!("{g:?}")).collect::<Vec<_>>().join(",")
}

/// One CSV row per grid point. Completed points are logged to `<axis>.manifest` so an interrupted
/// sweep resumes where it stopped; the manifest is discarded if the config, axis or grid changed.
pub fn sweep(cfg: &RunConfig, axis: Axis, grid: &[f64], out: &Path) -> Result<SweepOutcome> {
    sweep_partial(cfg, axis, grid, out, None)
}

/// As [`sweep`], stopping after `stop_after` newly computed points.
pub fn sweep_partial(cfg: &RunConfig, axis: Axis, grid: &[f64], out: &Path, stop_after: Option<usize>) -> Result<SweepOutcome> {
    in_pool(cfg.workers, || sweep_inner(cfg, axis, grid, out, stop_after))?
}

fn sweep_inner(cfg: &RunConfig, axis: Axis, grid: &[f64], out: &Path, stop_after: Option<usize>) -> Result<SweepOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let manifest = out.join(format!("{}.manifest", axis.name()));
    let header = format!("axis {}\ngrid {}\nconfig {}\n", axis.name(), grid_line(grid), toml_line(cfg));
    let mut done: Vec<Option<String>> = vec![None; grid.len()];
    let mut resumed = 0;
    if let Ok(text) = fs::read_to_string(&manifest) {
        if text.starts_with(&header) {
            for line in text[header.len()..].lines() {
                let Some((idx, row)) = line.split_once(' ') else { continue };
                if let Ok(i) = idx.parse::<usize>() {
                    if i < done.len() && done[i].is_none() {
                        done[i] = Some(row.to_string());
                        resumed += 1;
                    }
                }
            }
        }
    }
    if resumed == 0 {
        fs::write(&manifest, &header)?;
    }
    let needs_cal = axis.simulated() && done.iter().any(|d| d.is_none());
    let cal = if needs_cal { Some(calibrate(cfg)?) } else { None };
    let mut log = fs::OpenOptions::new().append(true).open(&manifest)?;
    let mut fresh = 0;
    let mut complete = true;
    for (i, &v) in grid.iter().enumerate() {
        if done[i].is_some() {
            continue;
        }
        if stop_after.is_some_and(|k| fresh >= k) {
            complete = false;
            break;
        }
        let row = match sweep_point(cfg, cal.as_ref(), axis, v) {
            Ok(mut cells) => {
                cells.push("ok".into());
                csv_line(&cells)?
            }
            Err(e) => {
                let mut cells = vec![sci(v)];
                cells.resize(axis.header().len() - 1, String::new());
                cells.push(format!("error: {e}"));
                csv_line(&cells)?
            }
        };
        writeln!(log, "{i} {row}")?;
        log.flush()?;
        done[i] = Some(row);
        fresh += 1;
    }
    let path = out.join(axis.file_name());
    let mut text = csv_line(&axis.header().iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    text.push('\n');
    let (mut rows, mut failures) = (0, 0);
    for r in done.iter().flatten() {
        rows += 1;
        failures += (!r.ends_with(",ok")) as usize;
        text.push_str(r);
        text.push('\n');
    }
    fs::write(&path, text)?;
    Ok(SweepOutcome { csv: path, rows, resumed, failures, complete })
}

fn toml_line(cfg: &RunConfig) -> String {
    let mut s = String::new();
    for line in cfg.to_toml().lines() {
        let _ = write!(s, "{line}\\n");
    }
    s
}

fn csv_line(cells: &[String]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(cells)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8").trim_end_matches('\n').to_string())
}

/// Human-readable digest of whatever run and sweep outputs exist in `dir`.
pub fn report(dir: &Path) -> Result<String> {
    let mut s = String::new();
    let summary = dir.join("summary.csv");
    if summary.exists() {
        let mut r = csv::Reader::from_path(&summary)?;
        let _ = writeln!(s, "run summary ({})", summary.display());
        for rec in r.records() {
            let rec = rec?;
            let _ = writeln!(s, "  {:<28} {}", &rec[0], &rec[1]);
        }
    }
    for axis in [Axis::Distance, Axis::VMod, Axis::PilotSnr, Axis::Linewidth] {
        let p = dir.join(axis.file_name());
        if !p.exists() {
            continue;
        }
        let mut r = csv::Reader::from_path(&p)?;
        let rows: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
        let _ = writeln!(s, "{} sweep: {} points ({})", axis.name(), rows.len(), p.display());
        let col = match axis {
            Axis::Distance => Some(5),
            Axis::VMod => Some(5),
            _ => None,
        };
        if let Some(c) = col {
            let best = rows
                .iter()
                .filter_map(|r| Some((r[0].parse::<f64>().ok()?, r[c].parse::<f64>().ok()?)))
                .fold(None, |b: Option<(f64, f64)>, (x, y)| if b.map_or(true, |b| y > b.1) { Some((x, y)) } else { b });
            if let Some((x, y)) = best {
                let _ = writeln!(s, "  max {} = {:.1} bit/s at {} = {}", axis.header()[c], y, axis.header()[0], x);
            }
        }
    }
    if s.is_empty() {
        return config(format!("no run or sweep outputs in {}", dir.display()));
    }
    Ok(s)
}
