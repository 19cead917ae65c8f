//! Command-line front end: argument parsing, matrix and report files, and
//! run manifests.

pub mod args;
pub mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit code: 0 on success, 2 for a bad invocation, 1 when the run
/// itself fails.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let rest: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::Thin(a) => commands::thin(a, &rest),
        Command::Multithin(a) => commands::multithin(a, &rest),
        Command::Diagnose(a) => commands::diagnose(a, &rest),
        Command::Cv(a) => commands::cv(a, &rest),
        Command::Simulate(a) => commands::simulate(a, &rest),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}
