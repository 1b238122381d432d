use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvqkd::config::{Preset, RunConfig};
use cvqkd::pipeline::{self, Axis};

#[derive(Parser)]
#[command(name = "cvqkd", version, about = "Simulate an LLO CV-QKD link end to end")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Vacuum and electronic-noise calibration only.
    Calibrate(Common),
    /// Full chain; exits non-zero when the secret key rate is zero.
    Run(Common),
    /// One CSV row per grid point, resumable.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// distance, v_mod, pilot_snr or linewidth
        #[arg(long)]
        axis: Axis,
        /// Comma list or start:step:stop
        #[arg(long, default_value = "")]
        grid: String,
    },
    /// Print the outputs found in a run or sweep directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// table1 or quick; ignored when --config is given
    #[arg(long, default_value = "table1")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> cvqkd::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::preset(self.preset),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> cvqkd::Result<ExitCode> {
    match cli.verb {
        Verb::Calibrate(c) => {
            let cfg = c.load()?;
            let cal = pipeline::in_pool(cfg.workers, || pipeline::calibrate(&cfg))??;
            pipeline::write_calibration(&c.out, &cal)?;
            println!(
                "snu scale {:.6e} counts², clearance {:.2} dB -> {}",
                cal.record.snu_scale,
                cal.record.clearance_db,
                c.out.join("calibration.toml").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Verb::Run(c) => {
            let cfg = c.load()?;
            let s = pipeline::run_experiment(&cfg, &c.out)?;
            print!("{}", pipeline::report(&c.out)?);
            Ok(if s.headline_skr() > 0.0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Verb::Sweep { common, axis, grid } => {
            let cfg = common.load()?;
            let grid = pipeline::parse_grid(&grid)?;
            let o = pipeline::sweep(&cfg, axis, &grid, &common.out)?;
            println!(
                "{} rows ({} resumed, {} failed) -> {}",
                o.rows,
                o.resumed,
                o.failures,
                o.csv.display()
            );
            Ok(if o.failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Verb::Report { out } => {
            print!("{}", pipeline::report(&out)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
