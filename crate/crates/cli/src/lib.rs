//! Command-line driver for inghamlab experiments.
//!
//! A run reads a JSON experiment config, executes one command and writes a
//! CSV or JSON artifact whose header echoes the effective config.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use config::{parse_config, ExperimentConfig, Format};

#[derive(Debug, Parser)]
#[command(name = "inghamlab", version, about = "Numerical experiments on vector exponential systems")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Artifact path; stdout when absent from both flag and config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for grid points.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Config file plus command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| format!("{}: {e}", cli.config.display()))?;
    let mut config = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    if let Some(out) = &cli.out {
        config.output.path = Some(out.clone());
    }
    Ok(config)
}

pub fn render(config: &ExperimentConfig, report: &output::Report) -> String {
    match config.output.format {
        Format::Csv => output::render_csv(config, report),
        Format::Json => output::render_json(config, report),
    }
}

/// Runs the CLI on `args` and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_INVALID;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = match effective_config(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("invalid config:\n{msg}");
            return EXIT_INVALID;
        }
    };
    let report = match run::run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let text = render(&config, &report);
    match &config.output.path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_INVALID;
            }
        }
        None => print!("{text}"),
    }
    EXIT_OK
}
