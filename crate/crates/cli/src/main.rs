//! `soamix`: runs conversion-gain, linearity and EVM experiments on the
//! SOA-MZI mixer models and writes CSV tables with SVG figures.

mod commands;
mod config;
mod error;
mod plots;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Runner;
use crate::config::{Config, RunMode};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "soamix", version, about = "SOA-MZI photonic sampling mixer experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Model path to run (overrides `mode`).
    #[arg(long, global = true, value_enum)]
    mode: Option<RunMode>,
    /// Worker threads for independent sweep points; 0 uses every core.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Conversion gain against data modulation index (default mode: analytic).
    CgSweep,
    /// Quasi-static control-power sweep and linearity points (always time-domain).
    Linearity,
    /// EVM against baud rate with FEC limits and constellations (default mode: analytic).
    EvmSweep,
    /// Invariant suite; exits nonzero when any check fails (default mode: both).
    Validate,
    /// Harmonic coefficients of the clock pulse train (default mode: analytic).
    PulseSpectrum,
    /// Re-renders figures from CSVs written by this tool.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Prints the default configuration as TOML.
    Config,
}

fn load(common: &Common) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = common.mode {
        cfg.mode = Some(mode);
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load(&cli.common)?;
    let mode = |default| cfg.mode.unwrap_or(default);
    match cli.command {
        Command::Config => {
            print!("{}", config::default_toml());
        }
        Command::Plot { csv } => {
            let out = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out)?;
            for path in &csv {
                match plots::plot_csv(path, &out)? {
                    Some(svg) => println!("wrote {}", svg.display()),
                    None => eprintln!("{}: no figure for this table", path.display()),
                }
            }
        }
        Command::CgSweep => {
            let m = mode(RunMode::Analytic);
            report(&commands::cg_sweep(&Runner::new(cfg.clone())?, m)?);
        }
        Command::Linearity => {
            report(&commands::linearity(&Runner::new(cfg.clone())?)?);
        }
        Command::EvmSweep => {
            let m = mode(RunMode::Analytic);
            report(&commands::evm_sweep(&Runner::new(cfg.clone())?, m)?);
        }
        Command::PulseSpectrum => {
            let m = mode(RunMode::Analytic);
            report(&commands::pulse_spectrum(&Runner::new(cfg.clone())?, m)?);
        }
        Command::Validate => {
            let m = mode(RunMode::Both);
            let (path, checks) = commands::validate(&Runner::new(cfg.clone())?, m)?;
            for c in &checks {
                println!("{} {} value={:e} limit={:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
            }
            println!("wrote {}", path.display());
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(CliError::ValidationFailed { failed, total: checks.len() });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
