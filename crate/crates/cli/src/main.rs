mod args;
mod commands;
mod json;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Curvature(a) => commands::curvature(a),
        Command::Flow(a) => commands::flow(a),
        Command::Verify(a) => commands::verify(a),
        Command::Spectrum(a) => commands::spectrum_cmd(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nilflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
