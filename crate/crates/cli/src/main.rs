//! `pgg`: command line runner for networked public goods games.
//!
//! Every subcommand writes one JSON report (stdout or `--out`). Exit status
//! is 0 on success, 1 when a computation fails and 2 on bad input.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
