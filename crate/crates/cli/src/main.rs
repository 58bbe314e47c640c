//! `unmixkit` command-line tool.
//!
//! Exit status: 0 on success, 1 on data or solver errors, 2 on invalid
//! flags.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::Cli;
use commands::Failure;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            Cli::command().error(clap::error::ErrorKind::ArgumentConflict, message).exit();
        }
        Err(Failure::Data(error)) => {
            eprintln!("error: {}", describe(&error));
            ExitCode::from(1)
        }
    }
}

/// The error and its causes joined by ": ", skipping causes that the
/// preceding message already ends with.
fn describe(error: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in error.chain() {
        let message = cause.to_string();
        if !text.ends_with(&message) {
            if !text.is_empty() {
                text += ": ";
            }
            text += &message;
        }
    }
    text
}
