//! `fedhdc` — experiment driver.
//!
//! ```text
//! fedhdc <mode> [--config PATH] [--seed N] [--out DIR] [--set key=value ...]
//! ```
//!
//! Exit codes: 0 success, 1 internal failure, 2 configuration error, 3 I/O
//! or data error, 4 infeasible instance.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use config::Overrides;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Core(fedhdc::Error),
}

impl CliError {
    pub fn from_core(e: fedhdc::Error) -> Self {
        use fedhdc::Error as E;
        match e {
            E::Infeasible(i) => CliError::Infeasible(i.to_string()),
            E::InvalidParameter(m) => CliError::Config(m),
            E::Io(_)
            | E::BadMagic(_)
            | E::UnsupportedType(_)
            | E::Truncated { .. }
            | E::Malformed(_)
            | E::CountMismatch { .. } => CliError::Io(e.to_string()),
            other => CliError::Core(other),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<fedhdc::Error> for CliError {
    fn from(e: fedhdc::Error) -> Self {
        CliError::from_core(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Federated training; accuracy per round.
    Train,
    /// Fit the rounds-vs-dimension curve.
    Fit,
    /// Energy-optimal allocation for one scenario.
    Optimize,
    /// Energy over a swept parameter, per scheme.
    Sweep,
    /// Feasibility certificate over the dimension grid.
    Certify,
    /// Draw a user deployment.
    GenScenario,
    /// Per-distance-group means of an optimized allocation.
    ReportGroups,
}

#[derive(Debug, Parser)]
#[command(name = "fedhdc", version, about = "Federated HDC experiments and energy optimization")]
struct Args {
    mode: Mode,
    /// JSON config; only keys that differ from the defaults are needed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set system.B=5e6`; values parse as JSON
    /// and fall back to strings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FEDHDC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("FEDHDC_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Core(fedhdc::Error::InvalidParameter(e.to_string())))
}

fn run(args: Args) -> Result<(), CliError> {
    init_threads()?;
    let flags = Overrides { seed: args.seed, out: args.out, set: args.set };
    let cfg = config::resolve(args.config.as_deref(), &flags)?;
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("creating {}: {e}", cfg.out.display())))?;
    match args.mode {
        Mode::Train => commands::train(&cfg),
        Mode::Fit => commands::fit(&cfg),
        Mode::Optimize => commands::optimize(&cfg),
        Mode::Sweep => commands::sweep(&cfg),
        Mode::Certify => commands::certify(&cfg),
        Mode::GenScenario => commands::gen_scenario(&cfg),
        Mode::ReportGroups => commands::report_groups(&cfg),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedhdc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
