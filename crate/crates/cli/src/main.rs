use std::process::ExitCode;

use clap::Parser;
use clapshot_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match clapshot_cli::execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
