//! Command-line front end and file formats for `chanadapt`.
//!
//! [`run`] is the whole `adapt` binary; [`run_with_io`] is the same with
//! caller-supplied streams so tests can capture output.

mod error;

pub mod bench;
pub mod commands;
pub mod formats;

use std::ffi::OsString;
use std::io::Write;

use clap::{CommandFactory, FromArgMatches};

pub use error::{CliError, Result};

use commands::{Cli, Ctx};

/// Runs `adapt` with process stdout/stderr and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Exit codes: 0 ok, 1 runtime error, 2 usage error. Errors are a single
/// `error: ...` line on `stderr`.
pub fn run_with_io<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => return clap_exit(e, stdout, stderr),
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return clap_exit(e, stdout, stderr),
    };
    let mut ctx = Ctx {
        global: &cli.global,
        stdout,
        stderr,
    };
    let code = match commands::dispatch(&cli, &matches, &mut ctx) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(ctx.stderr, "error: {}", one_line(&e.to_string()));
            e.exit_code()
        }
    };
    let _ = ctx.stdout.flush();
    code
}

fn clap_exit(e: clap::Error, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = write!(stdout, "{}", e.render());
            0
        }
        ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = write!(stderr, "{}", e.render());
            2
        }
        _ => {
            // Keep clap's headline, drop its usage block.
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            let _ = writeln!(stderr, "error: {}", first.strip_prefix("error: ").unwrap_or(first));
            2
        }
    }
}

fn one_line(s: &str) -> String {
    s.split('\n').map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ")
}
