use std::process::ExitCode;

use clap::Parser;
use kacsim::cli::{execute, Cli, Outcome};

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Breach) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
