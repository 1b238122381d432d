//! Secret key rates from the Table 1 operating point: both regimes, rate against fiber length,
//! and the modulation-variance optimum over the reported (β, FER) points.
//!
//!     cargo run --release --example key_rates

use cvqkd::estimate::LinkEstimate;
use cvqkd::security::{security_report, skr_vs_distance, vmod_optimize, zero_crossing_km, LinkModel, OperatingTable, RateMode, SecurityParams};

fn main() -> cvqkd::Result<()> {
    let sec = SecurityParams::default();
    let link = LinkEstimate::from_model(0.028, 0.212e-3, 0.68, 0.06272, 950_000_000, sec.delta_fail);
    let r = security_report(&link, &sec, 8.41)?;
    println!("I_AB {:.5}  χ_E {:.5}  Δ(n) {:.3e}", r.i_ab, r.chi_e, r.delta_n);
    println!("asymptotic {:.1} kbit/s, finite {:.1} kbit/s", r.skr_asymptotic_bps / 1e3, r.skr_finite_bps / 1e3);

    let model = LinkModel::default();
    let lengths: Vec<f64> = (0..=14).map(|i| 10.0 * i as f64).collect();
    println!("\n  km   asymptotic    finite (bit/s)");
    for p in skr_vs_distance(&lengths, &model, &sec)? {
        println!("{:4.0} {:12.0} {:10.0}", p.distance_km, p.skr_asym_bps, p.skr_finite_bps);
    }
    for mode in [RateMode::Asymptotic, RateMode::Finite] {
        if let Some(km) = zero_crossing_km(&model, &sec, mode, 400.0)? {
            println!("{mode:?} rate reaches zero at {km:.1} km");
        }
    }

    let table = OperatingTable::paper();
    let grid: Vec<f64> = (0..=24).map(|i| 8.0 + 0.05 * i as f64).collect();
    let (best, curve) = vmod_optimize(&grid, &|v| table.at(v), &link, &sec)?;
    println!("\nV_mod optimum {best:?}");
    for p in curve.iter().step_by(4) {
        println!("V_mod {:.2}: β {:.3} FER {:.2} -> {:.0} bit/s", p.v_mod, p.beta, p.fer, p.skr_bps);
    }
    Ok(())
}
