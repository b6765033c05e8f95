use std::process::ExitCode;

use clap::Parser;
use rssi_gat_cli::{execute, Cli, UsageError, TOOL};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match execute(cli.command, argv) {
        Ok(outcome) => {
            for line in outcome.stdout {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{TOOL}: error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
