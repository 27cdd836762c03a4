//! `transfer-lab`: batch runner for the transfer-operator experiments.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 assumption violation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use transfer_core::Error;

use crate::config::RunConfig;
use crate::output::{write_all, OutputPaths, Report};

const THREADS_ENV: &str = "TRANSFER_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Oracle,
    Spectrum,
    Blocks,
    Sweep,
    Correlate,
    CheckContour,
    CheckAssumptions,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Oracle => "oracle",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Blocks => "blocks",
            Subcommand::Sweep => "sweep",
            Subcommand::Correlate => "correlate",
            Subcommand::CheckContour => "check-contour",
            Subcommand::CheckAssumptions => "check-assumptions",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "transfer-lab",
    version,
    about = "Spectral experiments on complex transfer operators"
)]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,

    /// Flat `section.key = value` config file.
    config: Option<PathBuf>,

    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Also write whitespace-separated data next to the CSV.
    #[arg(long)]
    gnuplot: bool,

    /// Suppress the per-row summary lines.
    #[arg(long, short)]
    quiet: bool,
}

enum Failure {
    Config(String),
    Numerical(String),
    Assumption(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Assumption(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Assumption(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidInput(_) => Failure::Config(msg),
            Error::Assumption { .. } | Error::SlowGrowth(_) => Failure::Assumption(msg),
            Error::Domain { .. } | Error::NonConvergence { .. } | Error::NonFinite { .. } | Error::Degenerate(_) => {
                Failure::Numerical(msg)
            }
        }
    }
}

fn thread_count(cfg: &RunConfig) -> Result<usize, Failure> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return v
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{THREADS_ENV} = '{v}' is not a nonnegative integer")));
    }
    cfg.usize("solver.threads").map_err(|e| Failure::Config(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg =
        RunConfig::load(cli.command, cli.config.as_deref(), &cli.set).map_err(|e| Failure::Config(e.to_string()))?;
    let threads = thread_count(&cfg)?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }

    let mut pending: Option<Failure> = None;
    let report: Report = match cli.command {
        Subcommand::Oracle => commands::oracle(&cfg)?,
        Subcommand::Spectrum => commands::spectrum(&cfg)?,
        Subcommand::Blocks => commands::blocks(&cfg)?,
        Subcommand::Sweep => commands::sweep(&cfg)?,
        Subcommand::Correlate => commands::correlate(&cfg)?,
        Subcommand::CheckContour => commands::check_contour(&cfg)?,
        Subcommand::CheckAssumptions => {
            let (r, failures) = commands::check_assumptions_report(&cfg)?;
            if !failures.is_empty() {
                pending = Some(Failure::Assumption(format!(
                    "assumptions violated: {}",
                    failures.join(", ")
                )));
            }
            r
        }
    };

    let csv = cfg.output_path("output.csv", cli.command, "csv");
    let json = cfg.output_path("output.json", cli.command, "json");
    let gnuplot = cli.gnuplot.then(|| csv.with_extension("dat"));
    let paths = OutputPaths {
        csv: &csv,
        json: &json,
        gnuplot: gnuplot.as_deref(),
    };
    write_all(&cfg, cli.command.name(), &report, &paths)
        .map_err(|e| Failure::Config(format!("cannot write output: {e}")))?;
    if !cli.quiet {
        for line in &report.summary {
            println!("{line}");
        }
    }
    match pending {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("transfer-lab {}: {}", cli.command.name(), f.message());
            ExitCode::from(f.code())
        }
    }
}
