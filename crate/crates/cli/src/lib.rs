//! Command-line front end for `ldscope`.

pub mod cli;
pub mod config;
pub mod error;
pub mod figures;
pub mod run;

use std::ffi::OsString;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use crate::cli::Cli;
use crate::error::CliError;

/// Parses `args`, runs the command and maps the outcome to an exit status:
/// 0 on success, 1 on a runtime failure, 2 on invalid configuration.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(paths) => {
            let mut out = std::io::stdout().lock();
            for p in paths {
                let _ = writeln!(out, "{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cli: Cli) -> Result<Vec<std::path::PathBuf>, CliError> {
    let inv = cli.into_invocation()?;
    if inv.list_figures {
        let mut out = std::io::stdout().lock();
        for id in figures::ids() {
            if writeln!(out, "{id}").is_err() {
                break;
            }
        }
        return Ok(Vec::new());
    }
    let (cfg, origin) = run::resolve(inv)?;
    run::run(&cfg, &origin)
}
