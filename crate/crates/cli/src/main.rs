//! `dephimetry` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 bound violation,
//! 3 numerical failure. `DEPHIMETRY_THREADS` caps the worker pool.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{DephaseArgs, Failure, FigureArgs, Format, NoiseArgs, Output, SimulateArgs};

#[derive(Debug, Parser)]
#[command(name = "dephimetry", version, about = "Phase-estimation limits under correlated Gaussian dephasing")]
struct Cli {
    /// Output file (directory for the CSV comparison panel); stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the bound for one state and covariance.
    Bound(NoiseArgs),
    /// Quantum Fisher information before and after dephasing.
    Qfi(NoiseArgs),
    /// Dephased density matrix, exact or sampled.
    Dephase(DephaseArgs),
    /// Monte Carlo runs of the locally unbiased Bayes estimator.
    Simulate(SimulateArgs),
    /// Bound rows over a grid read from a config file.
    Sweep {
        config: PathBuf,
    },
    /// Figure data: scaling or comparison panel.
    Figure(FigureArgs),
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("DEPHIMETRY_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Usage(format!("DEPHIMETRY_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    let out = Output {
        out: cli.out,
        format: cli.format,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Bound(a) => commands::bound(a, &out),
        Command::Qfi(a) => commands::qfi_cmd(a, &out),
        Command::Dephase(a) => commands::dephase_cmd(a, &out),
        Command::Simulate(a) => commands::simulate_cmd(a, &out),
        Command::Sweep { config } => commands::sweep(config, &out),
        Command::Figure(a) => commands::figure(a, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
