//! Command line front end. [`run`] parses arguments, builds the effective
//! configuration, runs one subcommand inside a sized thread pool and maps
//! failures to exit codes: 0 success, 1 computational error, 2 bad
//! configuration.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};

use clap::{Arg, ArgMatches, Command};
use thiserror::Error;

mod commands;
pub mod config;

pub use config::{parse_poly, Family, PolySpec, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] arcdim_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            CliError::Config(_) => "Config",
            CliError::Compute(e) => e.name(),
            CliError::Io(_) => "Io",
        }
    }
}

fn command_line() -> Command {
    let mut cmd = Command::new("arcdim")
        .about("Escape-time components, pressure and dimension estimates for polynomial Julia sets")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &(name, about) in config::SUBCOMMANDS {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value file; flags take precedence"),
        );
        for k in config::keys(name) {
            let help = match k.default {
                Some(d) => format!("{} [default: {d}]", k.help),
                None => k.help.to_string(),
            };
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.name)
                    .value_name("VALUE")
                    .allow_hyphen_values(true)
                    .help(help),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn flags(command: &str, m: &ArgMatches) -> Vec<(String, String)> {
    config::keys(command)
        .iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect()
}

/// Runs the program on `args` (including the program name) and returns the
/// exit code. Reports go to `stdout` unless an output path says otherwise.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command_line().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match execute(name, sub, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}: {e}", e.name());
            e.exit_code()
        }
    }
}

fn execute(name: &str, sub: &ArgMatches, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = match sub.get_one::<String>("config") {
        Some(path) => Some(fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?),
        None => None,
    };
    let cfg = RunConfig::build(name, file.as_deref(), &flags(name, sub))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads()?)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    // Reports for stdout are buffered so the pool never touches the caller's writer.
    let mut buf = Vec::new();
    let result = pool.install(|| commands::dispatch(&cfg, &mut buf));
    stdout.write_all(&buf)?;
    stdout.flush()?;
    result
}

/// Writes `bytes` to `path`, or to `stdout` for `-`.
pub(crate) fn emit(path: &str, bytes: &[u8], stdout: &mut Vec<u8>) -> Result<(), CliError> {
    if path == "-" {
        stdout.extend_from_slice(bytes);
    } else {
        fs::write(path, bytes)?;
    }
    Ok(())
}
