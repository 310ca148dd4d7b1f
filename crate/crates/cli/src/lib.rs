//! Command-line front end of `cqe`.
//!
//! [`run`] parses arguments, executes one command and returns the process
//! exit code: 0 on success, 2 for input errors, 3 for numerical failures.

pub mod args;
mod commands;
pub mod error;
mod output;
pub mod parse;

use std::ffi::OsString;

use clap::{CommandFactory, Parser};

use crate::args::{Cli, Command};
use crate::error::{CliError, CliResult};

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cqe: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.threads {
        Some(0) => Err(CliError::input("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Numerical(format!("cannot start thread pool: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Describe(a) => commands::describe(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Wavefunction(a) => commands::wavefunction(&a),
        Command::MatrixElement(a) => commands::matrix_element(&a),
        Command::Decoherence(a) => commands::decoherence(&a),
        Command::DumpMatrices(a) => commands::dump_matrices(&a),
        Command::Man => {
            let mut out = Vec::new();
            clap_mangen::Man::new(Cli::command()).render(&mut out)?;
            output::write_bytes(None, &out)
        }
    }
}
