use std::process::ExitCode;

use bankfuse_cli::{run, Cli, CliError};
use clap::Parser;

fn main() -> ExitCode {
    // Argument errors exit with 2 from inside `parse`.
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let CliError::ChecksFailed { summary, .. } = &e {
                print!("{summary}");
            }
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
