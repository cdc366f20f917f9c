//! Command line front end: `fit`, `smooth`, `cv`, `synth` and `verify`.
//!
//! Every command writes CSV outputs plus a `manifest.json` into its output
//! directory. Exit codes: 0 success, 2 input error, 3 numerical failure.

pub mod args;
mod commands;
mod config;
pub mod manifest;

use std::ffi::OsString;
use std::fmt;

use clap::{CommandFactory, FromArgMatches};

pub use args::{Cli, Command};
pub use manifest::RunManifest;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<maxsmooth::Error> for CliError {
    fn from(e: maxsmooth::Error) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERIC };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parse `args` (including the program name) and run the command.
/// Help and version requests are returned as errors with code 0.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = Cli::command().try_get_matches_from(args).map_err(|e| CliError {
        code: e.exit_code(),
        message: e.render().to_string(),
    })?;
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::input(e.to_string()))?;
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    let pool = match cli.threads {
        Some(0) => return Err(CliError::input("--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::numeric(format!("cannot start thread pool: {e}")))?;
    pool.install(|| commands::dispatch(&cli.command, sub))
}

/// Process entry point; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(args) {
        Ok(()) => 0,
        Err(e) if e.code == 0 => {
            print!("{}", e.message);
            0
        }
        Err(e) if e.message.starts_with("error:") => {
            eprint!("{}", e.message);
            e.code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
