//! The `clapshot` command-line driver.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use args::{Cli, Command};
use config::ConfigFile;
use error::CliResult;

pub fn execute(cli: Cli) -> CliResult<()> {
    let needs_file = !matches!(cli.command, Command::Report(_) | Command::Ingest(_) | Command::Zeroshot(_));
    let file = if needs_file {
        ConfigFile::load(cli.config.as_deref())?
    } else {
        ConfigFile::default()
    };
    match &cli.command {
        Command::Synth(a) => commands::synth(file, a, cli.dry_run),
        Command::Ingest(a) => commands::ingest(a, cli.dry_run),
        Command::Adapt(a) => commands::adapt_cmd(file, a, cli.dry_run),
        Command::Run(a) => commands::run_cmd(file, a, cli.dry_run),
        Command::Sweep(a) => commands::sweep_cmd(file, a, cli.dry_run),
        Command::Report(a) => commands::report_cmd(a),
        Command::Zeroshot(a) => commands::zeroshot_cmd(a, cli.dry_run),
    }
}
