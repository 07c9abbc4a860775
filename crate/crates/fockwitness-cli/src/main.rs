//! Command-line front end for the `fockwitness` library: single-point
//! witness evaluation, parameter scans over state families, shot-level
//! simulation of the measurement protocol, and sample-budget queries.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{m0, scan, shots, witness, Globals};

#[derive(Parser, Debug)]
#[command(
    name = "fockwitness",
    version,
    about = "Moment-based entanglement witnesses on truncated number-basis states",
    propagate_version = true
)]
struct Cli {
    /// JSON config file; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// RNG seed for sampling commands (default 0)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for scans (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write output to this file instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,

    /// Output format: json | csv (defaults: witness/m0 → json, scan/shots → csv)
    #[arg(long, global = true)]
    format: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one separability minor on one state
    Witness(witness::WitnessArgs),
    /// Sweep one or two parameters and tabulate entanglement criteria
    Scan(scan::ScanArgs),
    /// Simulate the finite-shot measurement protocol
    Shots(shots::ShotsArgs),
    /// Critical sample counts from concentration bounds
    #[command(name = "m0")]
    M0(m0::M0Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals {
        config: cli.config,
        seed: cli.seed,
        threads: cli.threads,
        output: cli.output,
        format: cli.format,
    };
    let result = match &cli.command {
        Command::Witness(args) => witness::run(&globals, args),
        Command::Scan(args) => scan::run(&globals, args),
        Command::Shots(args) => shots::run(&globals, args),
        Command::M0(args) => m0::run(&globals, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
