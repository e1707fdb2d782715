//! `sfi-lab` command-line driver.
//!
//! Every subcommand reads one JSON run configuration, validates it before
//! doing any work, and writes its artifacts into a fresh
//! `<UTC timestamp>-<subcommand>` directory under the output root.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use sfi_lab::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "sfi-lab",
    version,
    about = "Signal fidelity simulation laboratory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration. Missing fields, or no file at all, take the
    /// full 50 × 50 defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output root; a timestamped run directory is created inside it.
    #[arg(
        long,
        global = true,
        env = "SFI_LAB_OUT",
        default_value = "runs",
        value_name = "DIR"
    )]
    pub out: PathBuf,

    /// Override the master seed (and the single-cohort seed).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Override the calibration strength.
    #[arg(long, global = true, value_name = "F64")]
    pub alpha: Option<f64>,

    /// Worker threads. Never changes outputs.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate one cohort from the `cohort` section of the configuration.
    Simulate,
    /// Per-patient SFI breakdown of a generated or supplied cohort.
    Sfi {
        /// Cohort CSV to score instead of generating one.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Train the reference forest of batch 0 and score its held-out half.
    Train,
    /// Calibrate one testing dataset of batch 0.
    Calibrate,
    /// Sweep the α grid and select the recommended α.
    Phase1,
    /// Batch-level comparison at `--alpha` (or the phase-1 selection).
    Phase2,
    /// Phase 1, phase 2, distance-to-reference and transfer evaluation.
    FullRun,
    /// Apply one model to many datasets without retraining.
    Transfer,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sfi { .. } => "sfi",
            Command::Train => "train",
            Command::Calibrate => "calibrate",
            Command::Phase1 => "phase1",
            Command::Phase2 => "phase2",
            Command::FullRun => "full-run",
            Command::Transfer => "transfer",
        }
    }
}

#[derive(Debug, Error)]
pub enum Failure {
    #[error("invalid configuration: {message}")]
    Config {
        message: String,
        violations: Vec<String>,
    },
    #[error(transparent)]
    Runtime(#[from] sfi_lab::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config { .. } | Failure::Runtime(sfi_lab::Error::Config(_)) => 2,
            _ => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            _ => match self {
                Failure::Io(_) | Failure::Runtime(sfi_lab::Error::Io(_)) => "io",
                _ => "runtime",
            },
        }
    }

    fn violations(&self) -> Vec<String> {
        match self {
            Failure::Config { violations, .. } => violations.clone(),
            Failure::Runtime(sfi_lab::Error::Config(v)) => v.clone(),
            _ => Vec::new(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure::Config {
            message: message.into(),
            violations: Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct ErrorReport {
    error: &'static str,
    exit_code: u8,
    message: String,
    violations: Vec<String>,
}

/// Load the configuration and apply flag overrides. Validation happens here,
/// before any work is scheduled.
fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut run = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| Failure::config(format!("cannot parse {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        run.master_seed = seed;
        run.cohort.seed = seed;
    }
    if let Some(alpha) = cli.alpha {
        run.transfer_alpha = alpha;
    }
    let mut problems = Vec::new();
    if let Err(sfi_lab::Error::Config(v)) = run.validate() {
        problems.extend(v);
    }
    if let Some(alpha) = cli.alpha {
        if !(alpha.is_finite() && alpha >= 0.0) {
            problems.push(format!("--alpha must be finite and >= 0, got {alpha}"));
        }
    }
    if cli.jobs == Some(0) {
        problems.push("--jobs must be at least 1".to_string());
    }
    if problems.is_empty() {
        Ok(run)
    } else {
        Err(Failure::Config {
            message: format!("{} violation(s)", problems.len()),
            violations: problems,
        })
    }
}

fn run(cli: &Cli) -> Result<PathBuf, Failure> {
    let config = load_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::Io(std::io::Error::other(e.to_string())))?;
    pool.install(|| commands::execute(cli, &config))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = ErrorReport {
                error: e.kind(),
                exit_code: e.exit_code(),
                message: e.to_string(),
                violations: e.violations(),
            };
            eprintln!(
                "{}",
                serde_json::to_string(&report)
                    .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", e.kind()))
            );
            ExitCode::from(e.exit_code())
        }
    }
}
