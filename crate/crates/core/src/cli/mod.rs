//! Config-driven experiment runner.
//!
//! Each command runs one experiment, writes its CSV tables and a JSON
//! manifest, and reports through the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | configuration or I/O error |
//! | 2 | numerical failure |
//! | 3 | the command's statistical gate failed |

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use config::{load_config, Command, InitKind, RunConfig};
pub use output::{read_manifest, write_outputs, RunManifest, Table};

use crate::error::{Result, VortexError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_GATE: i32 = 3;

/// Result of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// `None` for commands that only report.
    pub gate_passed: Option<bool>,
    pub summary: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.gate_passed == Some(false) {
            EXIT_GATE
        } else {
            EXIT_OK
        }
    }
}

/// Exit code for a failed run.
pub fn error_exit_code(err: &VortexError) -> i32 {
    match err {
        VortexError::NumericalFailure { .. } | VortexError::Degenerate(_) => EXIT_NUMERICAL,
        VortexError::Domain(_) | VortexError::SizeMismatch { .. } | VortexError::Config(_) | VortexError::Io(_) => {
            EXIT_CONFIG
        }
    }
}

/// Runs the configured command and writes its outputs to `config.out_dir`.
/// Nothing is written unless the experiment completes.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let command = config.command.ok_or_else(|| VortexError::Config("no command given".into()))?;
    let start = Instant::now();
    let out = commands::execute(command, config)?;
    let duration = start.elapsed().as_secs_f64();
    let manifest = write_outputs(&out.tables, &config.out_dir, command.name(), config, duration)?;
    Ok(RunOutcome { manifest, gate_passed: out.gate, summary: out.summary })
}

#[derive(Debug, Parser)]
#[command(name = "vortexlab", version, about = "Monte Carlo experiments on stochastic point-vortex systems")]
struct Args {
    /// One of: stationarity, entropy-decay, radius-law, pairlog, moments,
    /// limit-law, reversal, scaling, collision-bound
    command: String,
    /// Path to the key = value configuration file
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config
    #[arg(long)]
    out: Option<PathBuf>,
}

fn prepare(args: &Args) -> Result<RunConfig> {
    let command: Command = args.command.parse()?;
    let mut config = load_config(&args.config)?;
    if let Some(c) = config.command {
        if c != command {
            return Err(VortexError::Config(format!("config names command {c} but {command} was requested")));
        }
    }
    config.command = Some(command);
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stdout and errors to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = prepare(&args).and_then(|config| run(&config));
    match result {
        Ok(outcome) => {
            let verdict = match outcome.gate_passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "DONE",
            };
            println!("{verdict} {}: {}", outcome.manifest.command, outcome.summary);
            for o in &outcome.manifest.outputs {
                println!("  wrote {}", o.file);
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}
