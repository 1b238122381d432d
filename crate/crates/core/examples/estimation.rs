//! Link estimation from simulated frames: per-frame and pooled η, ξ with confidence bounds,
//! and the running excess-noise trace.
//!
//!     cargo run --release --example estimation -- [frames]

use cvqkd::config::{Preset, RunConfig};
use cvqkd::estimate::cumulative_noise_trace;
use cvqkd::pipeline;

fn main() -> cvqkd::Result<()> {
    let mut cfg = RunConfig::preset(Preset::Quick);
    cfg.estimation.signal_frames = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let cal = pipeline::calibrate(&cfg)?;
    let sim = pipeline::simulate(&cfg, &cal, 0)?;
    for f in sim.frames.iter().take(5) {
        println!("frame {}: η̂ {:.4}  ξ̂ {:+.1} mSNU", f.report.frame_id, f.estimate.eta_hat, f.estimate.xi_hat * 1e3);
    }
    let p = &sim.pooled;
    println!("pooled over {} symbols: η̂ {:.5} ≥ {:.5}, ξ̂ {:.2} ≤ {:.2} mSNU (true η {:.5}, injected ξ {:.3} mSNU)",
        p.n_used, p.eta_hat, p.eta_low, p.xi_hat * 1e3, p.xi_up * 1e3, cfg.channel.eta(), cfg.channel.xi_injected.total() * 1e3);
    let estimates: Vec<_> = sim.frames.iter().map(|f| f.estimate).collect();
    for t in cumulative_noise_trace(&estimates)?.iter().step_by(5) {
        println!("after {:3} frames: ξ {:+.2} mSNU, upper {:.2}", t.n_frames, t.xi_cum_msnu, t.xi_up_msnu);
    }
    Ok(())
}
