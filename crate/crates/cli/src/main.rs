use std::process::ExitCode;

use clap::Parser;
use fa_cli::{run_to_exit_code, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::try_from(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("fa: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    ExitCode::from(run_to_exit_code(&cfg))
}
