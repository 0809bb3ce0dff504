use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use omicsfuse_cli::commands::{run, Cli};
use omicsfuse_cli::CliError;

/// Usage line of the invoked subcommand, or of the top-level command.
fn usage() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args().nth(1).unwrap_or_default();
    let usage = match cmd.find_subcommand_mut(&name) {
        Some(sub) => sub.render_usage(),
        None => cmd.render_usage(),
    };
    usage.to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", usage());
            }
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\n{}", usage());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
