use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use lmb_peecs::harness::{
    emit_comparison, emit_outputs, run_comparison, run_monte_carlo, window_mean, with_workers,
    FilterMode, MonteCarlo, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "lmb-peecs",
    version,
    about = "LMB tracking with PEECS sensor control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run of one filter mode.
    Run {
        /// TOML configuration file (default: built-in scenario).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of Monte Carlo trials; overrides the config.
        #[arg(long)]
        trials: Option<usize>,
        /// lmb-peecs or cbmember-peecs; overrides the config.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<FilterMode>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG plots.
        #[arg(long)]
        plot: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Both modes on shared truth and measurement draws.
    Compare {
        /// TOML configuration file (default: built-in scenario).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of Monte Carlo trials; overrides the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG plots.
        #[arg(long)]
        plot: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn parse_mode(s: &str) -> Result<FilterMode, String> {
    s.parse().map_err(|e: lmb_peecs::Error| e.to_string())
}

fn load(
    config: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<PathBuf>,
) -> anyhow::Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => {
            RunConfig::load(&path).with_context(|| format!("loading {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(trials) = trials {
        cfg.n_trials = trials;
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(mc: &MonteCarlo) {
    let total: Vec<f64> = mc.aggregate.iter().map(|a| a.ospa_total.mean).collect();
    let k = total.len() as u32;
    println!(
        "{}: {} trials, mean OSPA scans 1-{}: {:.3}, last scan: {:.3}",
        mc.mode,
        mc.records.len(),
        k,
        window_mean(&total, 1, k),
        total.last().copied().unwrap_or(f64::NAN)
    );
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            mode,
            out,
            plot,
            workers,
        } => {
            let mut cfg = load(config, seed, trials, out)?;
            if let Some(mode) = mode {
                cfg.mode = mode;
            }
            let mc = with_workers(workers, || run_monte_carlo(&cfg))??;
            emit_outputs(&mc, &cfg.output_dir, plot)?;
            summarize(&mc);
        }
        Command::Compare {
            config,
            seed,
            trials,
            out,
            plot,
            workers,
        } => {
            let cfg = load(config, seed, trials, out)?;
            let runs = with_workers(workers, || run_comparison(&cfg))??;
            emit_comparison(&runs, &cfg.output_dir, plot)?;
            for mc in &runs {
                summarize(mc);
            }
        }
        Command::DefaultConfig => print!("{}", RunConfig::default().to_toml_string()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
