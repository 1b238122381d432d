//! UKF smoother against the raw band-passed pilot phase for a 200 Hz Wiener phase, over pilot SNR.
//!
//!     cargo run --release --example phase_tracking

use std::f64::consts::TAU;

use cvqkd::channel::wiener_phase;
use cvqkd::dsp;
use cvqkd::rx::pilot::{extract_from_spectrum, local_noise_floor, mask_noise_bandwidth, unwrapped_phase};
use cvqkd::rx::ukf::residual_phase_variance;
use cvqkd::rx::{ukf_phase_track, PhaseTrackState, SigmaParams};
use cvqkd::snu::rng::{Gaussian, Stream};
use num_complex::Complex64;

fn main() -> cvqkd::Result<()> {
    let (n, fs, f0, bw, lw) = (200_000, 1e9, 4.1e8, 1e6, 200.0);
    let enbw = mask_noise_bandwidth(bw);
    let trace = wiener_phase(n, lw, fs, 5)?;
    println!("pilot SNR   raw        UKF        UKF posterior  (rad²)");
    for snr_db in (0..=30).step_by(6) {
        let snr = 10f64.powf(snr_db as f64 / 10.0);
        let sd = (fs / (2.0 * enbw * snr)).sqrt();
        let mut g = Gaussian::new(6, Stream::Test, snr_db as u64);
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, TAU * (f0 * i as f64 / fs).fract() + trace.theta[i]) + Complex64::new(sd * g.sample(), sd * g.sample()))
            .collect();
        dsp::fft(&mut x);
        let bb: Vec<Complex64> = extract_from_spectrum(&x, fs, f0, bw)
            .iter()
            .enumerate()
            .map(|(i, z)| z * Complex64::from_polar(1.0, -TAU * (f0 * i as f64 / fs).fract()))
            .collect();
        let r = local_noise_floor(&x, fs, f0);
        let q = PhaseTrackState::q_from_linewidth(lw, fs);
        let init = PhaseTrackState::initial(&bb, q, r, 1.0, SigmaParams::default());
        let (track, est) = ukf_phase_track(&bb, init, true, 10.0, 0)?;
        println!(
            "{snr_db:5} dB  {:.3e}  {:.3e}  {:.3e}",
            residual_phase_variance(&unwrapped_phase(&bb), &trace.theta),
            residual_phase_variance(&track.theta, &trace.theta),
            est.v_rpn
        );
    }
    Ok(())
}
