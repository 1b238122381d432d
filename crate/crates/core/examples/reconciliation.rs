//! Demo MET-LDPC code with 8-dimensional reconciliation: FER curve, threshold and β above threshold.
//!
//!     cargo run --release --example reconciliation -- [block_len] [blocks]

use cvqkd::recon::{fer_curve, fer_threshold, measure_beta_fer, LdpcCode, MetDistribution, ReconConfig};

fn main() -> cvqkd::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let blocks: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let code = LdpcCode::from_met(&MetDistribution::demo_rate_005(), n, 1)?;
    println!("code n={} m={} edges={} rate={:.4}", code.block_len, code.n_checks, code.n_edges(), code.code_rate);
    let cfg = ReconConfig { blocks, block_len: n, ..Default::default() };
    let grid: Vec<f64> = (0..9).map(|i| -11.4 + 0.15 * i as f64).collect();
    let t0 = std::time::Instant::now();
    let curve = fer_curve(&code, &grid, &cfg, 7)?;
    for (db, s) in grid.iter().zip(&curve) {
        println!("snr {db:6.2} dB  fer {:.3}  beta {:.3}  iters {:.0}  undetected {}", s.fer, s.beta, s.mean_iters, s.disagreements);
    }
    println!("curve took {:.1} s", t0.elapsed().as_secs_f64());
    match fer_threshold(&curve) {
        Some(th) => {
            let above = measure_beta_fer(&code, th * 10f64.powf(0.05), &cfg, 8)?;
            println!("threshold {:.3} dB; at +0.5 dB: beta {:.3} fer {:.3}", 10.0 * th.log10(), above.beta, above.fer);
        }
        None => println!("FER never crosses 0.5 on this grid"),
    }
    Ok(())
}
