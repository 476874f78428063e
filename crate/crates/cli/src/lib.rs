//! `smallobs` command-line front end.
//!
//! [`run`] parses arguments, sets up logging and the worker pool, dispatches
//! to a subcommand and maps failures to documented exit codes.

mod args;
mod commands;

use std::ffi::OsString;

use clap::Parser;
use smallobs_core::error::ErrorCategory;

pub use args::{Cli, Command, RoadMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DATA_FORMAT: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Usage => EXIT_USAGE,
        ErrorCategory::Io => EXIT_IO,
        ErrorCategory::DataFormat => EXIT_DATA_FORMAT,
        ErrorCategory::Numerical => EXIT_NUMERICAL,
    }
}

/// Runs one invocation and returns the process exit status. Diagnostics go to
/// standard error as a single `error:` line.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // Clap's lead paragraph, before the usage block, as one line.
            let rendered = e.render().to_string();
            let lead: Vec<&str> = rendered
                .lines()
                .take_while(|l| !l.trim().is_empty() && !l.starts_with("Usage:"))
                .map(str::trim)
                .collect();
            eprintln!("{}", lead.join(" "));
            return EXIT_USAGE;
        }
        Err(e) => {
            let _ = e.print();
            return EXIT_OK;
        }
    };

    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_IO;
        }
    };
    match pool.install(|| commands::execute(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            exit_code(e.category())
        }
    }
}
