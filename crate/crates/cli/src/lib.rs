//! Command-line driver: configuration, run manifests, result tables and
//! the error-versus-noise plot.
//!
//! Exit codes: 0 on success, 1 for invalid input or I/O failure, 2 for a
//! numerical failure (non-convergence, divergence).

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod plot;
pub mod tables;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command};
pub use config::RunConfig;

pub const THREADS_ENV: &str = "COMPACT_TIK_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Invalid(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<compact_tik::error::Error> for CliError {
    fn from(e: compact_tik::error::Error) -> Self {
        use compact_tik::error::Error;
        match e {
            Error::NumericalFailure(_) | Error::Diverged { .. } => CliError::Numerical(e.to_string()),
            Error::Io(_) => CliError::Io(e.to_string()),
            Error::InvalidArgument(_) | Error::Format(_) => CliError::Invalid(e.to_string()),
        }
    }
}

/// Effective configuration: defaults, then `--config`, then flags.
pub fn effective_config(cmd: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = match &cmd.common().config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cmd.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Invalid(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        _ => Ok(None),
    }
}

/// Runs an already parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli.command)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.command.common().threads)? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(&cli.command, cfg))
}

/// Parses `argv` (program name first), runs it and returns the exit code.
/// Errors go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
