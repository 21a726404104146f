//! `schrograph` — run graph validation, finite-section assembly, spectral
//! solves, and the truncation-convergence experiments from a JSON graph
//! description, leaving CSV and JSON artifacts in the output directory.
//!
//! Exit codes: 0 when the run completed and every checked invariant held,
//! 1 when an invariant failed, 2 for unusable input or configuration, and
//! 3 when a solver did not converge.

mod commands;
mod config;

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = config::Cli::parse();
    if let Err(msg) = config::init_threads() {
        eprintln!("schrograph: {msg}");
        return ExitCode::from(2);
    }
    let run_config = match config::RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("schrograph: {msg}");
            return ExitCode::from(2);
        }
    };
    match commands::run(&run_config) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("schrograph: an invariant check failed; see summary.json");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("schrograph: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
