//! `basscalib`: calibrate, sweep, simulate and verify from a JSON config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use basscalib_core::Error;
use clap::{Parser, Subcommand};

use commands::Status;
use config::RunConfig;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  usage, configuration, I/O or numerical error
  2  market data error (malformed or arbitrageable quotes)
  3  fixed-point iteration did not converge (trace still written)
  4  assumption violated (convex order, irreducibility, density floor)
     or artifact verification failed
  5  simulation diagnostics exceeded their thresholds

Set BASSCALIB_LOG (error, warn, info, debug, trace) for log output.";

#[derive(Debug, Parser)]
#[command(name = "basscalib", version, about = "Bass local volatility calibration", after_help = EXIT_CODES)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, overriding the config.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate the model and write the artifact, traces and a summary.
    Calibrate,
    /// Run a truncated-normal ramp and write iterations and hull sizes.
    Sweep,
    /// Simulate paths from an artifact and check marginals and martingale gaps.
    Simulate {
        /// Artifact to simulate, overriding the config.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Reload an artifact and re-check its fixed points.
    Verify {
        /// Artifact to check, overriding the config.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Data(_) | Error::Csv(_) => 2,
        Error::NonConvergence { .. } => 3,
        Error::Assumption(_) | Error::Ellipticity(_) | Error::Verification(_) => 4,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => return Err(Error::Domain("--config is required for this command".into())),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Status, Error> {
    let cfg = match (&cli.command, &cli.config) {
        (Command::Verify { artifact: Some(_) }, None) => None,
        _ => Some(load_config(cli)?),
    };
    let threads = cfg.as_ref().and_then(|c| c.threads).or(cli.threads);
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    match &cli.command {
        Command::Calibrate => commands::calibrate(cfg.as_ref().unwrap()),
        Command::Sweep => commands::sweep(cfg.as_ref().unwrap()),
        Command::Simulate { artifact } => {
            let mut cfg = cfg.unwrap();
            if artifact.is_some() {
                cfg.artifact = artifact.clone();
            }
            commands::simulate_cmd(&cfg)
        }
        Command::Verify { artifact } => {
            let path = artifact.clone().unwrap_or_else(|| cfg.as_ref().unwrap().artifact_path());
            commands::verify(&path)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BASSCALIB_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::DiagnosticsFailed) => {
            eprintln!("error: simulation diagnostics exceeded their thresholds");
            ExitCode::from(5)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
