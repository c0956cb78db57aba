//! `ctpdual`: run, sweep and validate two-detector experiments from TOML.
//!
//! Exit status: 0 on success, 1 on a numerical failure or a failed
//! validation check, 2 on an unreadable or invalid configuration, 3 when a
//! requested functional diverges.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctpdual::experiment::{
    run, sweep, to_json, validate, ExperimentConfig, ExperimentError, TOLERANCE_TIER_ENV,
    VALIDATION_SCALE_ENV,
};

#[derive(Parser)]
#[command(
    name = "ctpdual",
    version,
    about = "Decoherence and which-path duality for two detectors coupled to a scalar field"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the influence functionals and observables of one configuration.
    Run(Common),
    /// Evaluate every point of the `[[sweep.axes]]` grid and write a CSV table.
    Sweep(Common),
    /// Run the closed-form versus oracle battery and the invariant checks.
    #[command(after_help = format!(
        "Environment: {TOLERANCE_TIER_ENV}=strict|standard|fast selects a quadrature tier; \
         {VALIDATION_SCALE_ENV}=<x> multiplies every tolerance."
    ))]
    Validate {
        #[command(flatten)]
        common: Common,
        /// Overrides `validate.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration in TOML.
    #[arg(long, short)]
    config: PathBuf,
    /// Output file; defaults to the path in `[output]`, else standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    if let Some(n) = common.threads {
        // Fails only if the pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let text = fs::read_to_string(&common.config).map_err(|e| ExperimentError::InvalidConfig {
        field: "--config".into(),
        reason: format!("{}: {e}", common.config.display()),
    })?;
    ExperimentConfig::from_toml_str(&text)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), ExperimentError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(command: &Command) -> Result<bool, ExperimentError> {
    match command {
        Command::Run(common) => {
            let config = load(common)?;
            let report = run(&config)?;
            let out = common.out.as_deref().or(config.output.report.as_deref());
            emit(out, &to_json(&report))?;
            Ok(true)
        }
        Command::Sweep(common) => {
            let config = load(common)?;
            let table = sweep(&config)?;
            let out = common.out.as_deref().or(config.output.csv.as_deref());
            emit(out, &table.to_csv())?;
            Ok(true)
        }
        Command::Validate { common, seed } => {
            let config = load(common)?;
            let report = validate(&config, *seed)?;
            for check in &report.checks {
                eprintln!("{}", check.summary());
            }
            let out = common
                .out
                .as_deref()
                .or(config.output.validation.as_deref());
            emit(out, &to_json(&report))?;
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
