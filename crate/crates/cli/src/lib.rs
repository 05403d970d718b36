//! Command-line front end and HTTP service for the qposer pose prior.

pub mod commands;
pub mod config;
pub mod error;
pub mod service;

pub use commands::Cli;
pub use error::{CliError, CliResult};

use clap::Parser;

/// Parse `argv`, run the subcommand and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}

/// Diagnostics on standard error, level from `QPOSER_LOG` (error, info, debug).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("QPOSER_LOG", "info");
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .try_init();
}
