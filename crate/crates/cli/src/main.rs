use std::process::ExitCode;

use clap::Parser;
use twinloss_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{e}");
            if matches!(e, twinloss_cli::CliError::Failed(_)) {
                eprintln!();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
