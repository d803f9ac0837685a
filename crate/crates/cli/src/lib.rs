//! Command-line driver for the `dfgp` forecaster.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod gradcheck;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::ForecastOptions;
use crate::config::RunConfig;
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dfgp", version, about = "Global factor + local GP probabilistic forecaster")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic dataset with its ground-truth decomposition.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model and write `model.ckpt`, `history.csv` and `config.echo`.
    Train {
        /// Long-format CSV; falls back to `data_path` in the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; falls back to `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write per-step predictive means, variances and quantiles.
    Forecast {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the checkpoint's configured horizon.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Forecast past the end of the data instead of backtesting its last `horizon` points.
        #[arg(long)]
        from_end: bool,
        /// Also write a tidy CSV of the recent history and forecast bands.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Score a forecast CSV against actuals.
    Evaluate {
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        actuals: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare autodiff gradients with finite differences on a miniature model.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds to check.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Swap in a deliberately wrong backward rule; the check must then fail.
        #[arg(long)]
        negative_control: bool,
    },
}

/// Cap rayon's pool at `DFGP_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("DFGP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("DFGP_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot configure {n} threads: {e}")))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth { config, out } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let s = commands::cmd_synth(&cfg, &out)?;
            println!("wrote {} rows to {}", s.rows, s.data.display());
            println!("wrote ground truth to {}", s.truth.display());
        }
        Command::Train {
            data,
            config,
            out,
            seed,
        } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.model.seed = seed;
            }
            let data = data
                .or_else(|| cfg.data_path.clone())
                .ok_or_else(|| CliError::Config("no --data given and no data_path in config".into()))?;
            let out = out
                .or_else(|| cfg.out_dir.clone())
                .ok_or_else(|| CliError::Config("no --out given and no out_dir in config".into()))?;
            let s = commands::cmd_train(&cfg, &data, &out)?;
            if let (Some(first), Some(last)) = (s.history.first_nll(), s.history.last_nll()) {
                println!("nll {first:.6} -> {last:.6} over {} epochs", s.history.epochs.len());
            }
            println!("wrote {}", s.checkpoint.display());
        }
        Command::Forecast {
            ckpt,
            data,
            horizon,
            out,
            from_end,
            plot_data,
        } => {
            let options = ForecastOptions {
                horizon,
                from_end,
                plot_data,
            };
            let results = commands::cmd_forecast(&ckpt, &data, &out, &options)?;
            let rows: usize = results.iter().map(|r| r.mean.len()).sum();
            println!("wrote {rows} forecast rows to {}", out.display());
        }
        Command::Evaluate {
            forecast,
            actuals,
            out,
        } => {
            let report = commands::cmd_evaluate(&forecast, &actuals, &out)?;
            for (k, v) in commands::report_entries(&report) {
                println!("{k}={v}");
            }
        }
        Command::Gradcheck {
            seed,
            seeds,
            negative_control,
        } => {
            let report = gradcheck::run_gradcheck(seed, seeds, negative_control)?;
            println!("{:<20} {:>14}  status", "group", "max_rel_error");
            for g in &report.groups {
                let status = if g.max_relative_error < gradcheck::TOLERANCE { "ok" } else { "FAIL" };
                println!("{:<20} {:>14.3e}  {status}", g.name, g.max_relative_error);
            }
            println!(
                "{} seeds, tolerance {:e}: {}",
                report.seeds.len(),
                gradcheck::TOLERANCE,
                if report.passed() { "PASS" } else { "FAIL" }
            );
            if !report.passed() {
                return Err(CliError::GradcheckFailed);
            }
        }
    }
    Ok(())
}
