//! `lzs`: simulate and analyze LZS interference maps of a flux qubit.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, Preset};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lzs", version, about = "Landau-Zener-Stückelberg spectroscopy of a flux qubit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Built-in parameter set; replaces the spectrum and grid of --config.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write a 16-bit PGM image of the map.
    #[arg(long, global = true)]
    pgm: bool,
    /// Relative integrator tolerance (absolute is 1% of it).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a (Φ_f, τ) interference map.
    Sweep,
    /// Record the density matrix along one pulse.
    Trace(commands::TraceArgs),
    /// Extract slope, gaps and anticrossing positions from a map.
    Analyze(commands::AnalyzeArgs),
    /// Dominant fringe frequency of map columns.
    Fft(commands::FftArgs),
    /// Fit a gap to measured return populations.
    FitGap(commands::FitGapArgs),
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset,
            out: self.out.clone(),
            pgm: self.pgm,
            tolerance: self.tolerance,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Sweep => commands::sweep(g.config.as_deref(), &g.overrides(), g.workers),
        Command::Trace(a) => commands::trace(g.config.as_deref(), &g.overrides(), a),
        Command::Analyze(a) => commands::analyze(a, g.out.as_deref()),
        Command::Fft(a) => commands::fft(a),
        Command::FitGap(a) => commands::fit_gap(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
