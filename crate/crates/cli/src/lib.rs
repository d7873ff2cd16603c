//! Command-line front end for `mvtreelet`.
//!
//! Every command assembles a [`commands::Report`] in memory and writes it to
//! the output directory as `result.json` plus CSV tables and PGM heatmaps.
//! Failures print a JSON error object on stderr and exit with a status that
//! identifies the error kind.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;

use clap::Parser;

use crate::args::Cli;
use crate::error::{CliError, CliResult};

/// Caps the rayon pool from `MVTREELET_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("MVTREELET_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MVTREELET_THREADS must be a positive integer, got `{raw}`")))?;
    // an already-initialized global pool is not an error worth failing on
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments, runs the command, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return 0;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    let outcome = configure_threads()
        .and_then(|_| commands::run(&cli))
        .and_then(|report| report.write().map(|_| report));
    match outcome {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> i32 {
    eprintln!("{}", e.to_json());
    e.exit_code()
}
