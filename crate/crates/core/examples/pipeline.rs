//! A short end-to-end run and a distance sweep, written to a directory.
//!
//!     cargo run --release --example pipeline -- [out_dir]

use std::path::PathBuf;

use cvqkd::config::{Preset, RunConfig};
use cvqkd::pipeline::{self, Axis};

fn main() -> cvqkd::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/example".into()));
    let mut cfg = RunConfig::preset(Preset::Quick);
    cfg.estimation.signal_frames = 10;
    cfg.reconciliation.code.blocks = 2;
    let s = pipeline::run_experiment(&cfg, &out.join("run"))?;
    println!("headline SKR {:.0} bit/s ({:?} bounds)", s.headline_skr(), s.source);
    let grid = pipeline::parse_grid("0:20:140")?;
    let o = pipeline::sweep(&cfg, Axis::Distance, &grid, &out.join("sweep"))?;
    println!("{} sweep rows -> {}", o.rows, o.csv.display());
    print!("{}", pipeline::report(&out.join("run"))?);
    Ok(())
}
