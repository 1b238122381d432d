//! Alice's waveform through 100 km of fiber and the detector: spectrum, clearance and SNU calibration.
//!
//!     cargo run --release --example signal_chain

use cvqkd::channel::{make_measurement_set, MeasurementPlan};
use cvqkd::config::{Preset, RunConfig};
use cvqkd::dsp;
use cvqkd::snu::snu_calibrate;
use cvqkd::tx;

/// Variance of a real signal carried in [lo, hi) Hz, from its Welch spectrum.
fn band_power(psd: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let seg = psd.len();
    let inside: f64 = (0..seg / 2).filter(|&k| (lo..hi).contains(&(k as f64 * fs / seg as f64))).map(|k| psd[k]).sum();
    2.0 * inside / seg as f64
}

fn main() -> cvqkd::Result<()> {
    let cfg = RunConfig::preset(Preset::Quick);
    let fs = cfg.tx.sample_rate_hz;
    let syms = tx::generate_symbols(10_000, &cfg.tx, 3)?;
    let (vx, vp) = syms.quadrature_variances();
    println!("symbols: Var(x) {vx:.3}, Var(p) {vp:.3} (V_mod {})", cfg.tx.v_mod);
    let wave = tx::synthesize_waveform(&syms, &cfg.tx)?;
    let psd = dsp::welch_psd(&wave.real_f64(), 1024);
    println!(
        "transmitted variance: signal band {:.4}, pilot {:.4} SNU",
        band_power(&psd, fs, 40e6, 160e6),
        band_power(&psd, fs, 175e6, 185e6)
    );

    let plan = MeasurementPlan { samples_per_frame: 100_000, signal_frames: 2, vacuum_frames: 4, electronic_frames: 2 };
    let set = make_measurement_set(&cfg.tx, &cfg.channel, &cfg.detector, plan, cfg.seed)?;
    let cal = snu_calibrate(&set.vacuum_frames, &set.electronic_frames)?;
    println!(
        "calibration: vacuum {:.4e}, electronic {:.4e} counts², clearance {:.2} dB, t/2 = {:.2} mSNU",
        cal.vacuum_variance,
        cal.electronic_variance,
        cal.clearance_db,
        cal.electronic_snu() * 1e3
    );
    let rx = cal.normalize(&set.signal_frames[0])?;
    let psd = dsp::welch_psd(&rx.real_f64(), 1024);
    let pilot = cfg.tx.pilot_freq_hz + cfg.channel.freq_offset_hz;
    println!(
        "received at {} km (η = {:.4}), variance in SNU: quantum band {:.4}, pilot {:.4}, total {:.4}",
        cfg.channel.length_km,
        cfg.channel.eta(),
        band_power(&psd, fs, 270e6, 390e6),
        band_power(&psd, fs, pilot - 5e6, pilot + 5e6),
        psd.iter().sum::<f64>() / psd.len() as f64
    );
    Ok(())
}
