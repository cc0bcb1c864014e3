//! Command-line front end: argument types and the command dispatcher.

mod commands;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use divscale::{EstimatorMode, ProfileMode};
use serde::Serialize;

use crate::summary::RunSummary;

/// Divergence, dependency and scaling analysis of branching continuations.
#[derive(Debug, Parser)]
#[command(name = "divscale", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Generate a synthetic trace file.
    Simulate(SimulateArgs),
    /// Estimate divergence, dependency profiles and cosine histograms.
    Estimate(EstimateArgs),
    /// Evaluate Upsilon(n), regimes and the lambda calibration.
    Bound(BoundArgs),
    /// Fit S(n) = c / n^alpha to score series.
    Fit(FitArgs),
    /// Score differences between two configs.
    Compare(CompareArgs),
    /// Estimate plus the full bound-chain check.
    Report(EstimateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Estimate(_) => "estimate",
            Command::Bound(_) => "bound",
            Command::Fit(_) => "fit",
            Command::Compare(_) => "compare",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON generator spec; omitted fields take their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Trace file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub n_max: usize,
    #[arg(long, default_value = "sup", value_parser = parse_mode)]
    #[serde(serialize_with = "as_display")]
    pub mode: ProfileMode,
    #[arg(long, default_value = "norm-of-sum", value_parser = parse_estimator)]
    #[serde(serialize_with = "as_display")]
    pub estimator: EstimatorMode,
    #[arg(long, default_value_t = divscale::dependency::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    /// Dependency profile CSV as written by `estimate`.
    #[arg(long, conflicts_with = "constants", required_unless_present = "constants")]
    pub profile: Option<PathBuf>,
    /// Constant measures `psi_equal_ab,psi_cross_aa,psi_cross_ab`.
    #[arg(long, value_delimiter = ',')]
    pub constants: Option<Vec<f64>>,
    /// Divergence CSV; enables the lambda fit and the overlay curve.
    #[arg(long)]
    pub divergence: Option<PathBuf>,
    /// Largest n to tabulate; defaults to the profile length, or 32.
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Score CSV (`benchmark,metric,config,n_l,score`).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub config: Option<String>,
    /// n_l values to leave out, e.g. `384,512`.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config_a: String,
    #[arg(long)]
    pub config_b: String,
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<ProfileMode, String> {
    s.parse().map_err(|e: divscale::Error| e.to_string())
}

fn parse_estimator(s: &str) -> Result<EstimatorMode, String> {
    s.parse().map_err(|e: divscale::Error| e.to_string())
}

fn as_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Runs one command, writes `run_summary.json` next to its outputs and maps
/// a fatal error to a failing exit code.
pub fn run(cli: Cli) -> ExitCode {
    let started = Instant::now();
    let name = cli.command.name();
    let mut summary = RunSummary::new(name, serde_json::to_value(&cli.command).unwrap_or_default());

    let (out, result) = match &cli.command {
        Command::Simulate(a) => (&a.out, commands::simulate(a, &mut summary)),
        Command::Estimate(a) => (&a.out, commands::estimate(a, &mut summary).map(drop)),
        Command::Bound(a) => (&a.out, commands::bound(a, &mut summary)),
        Command::Fit(a) => (&a.out, commands::fit(a, &mut summary)),
        Command::Compare(a) => (&a.out, commands::compare(a, &mut summary)),
        Command::Report(a) => (&a.out, commands::report(a, &mut summary)),
    };

    let fatal = result.as_ref().err().map(|e| format!("{e:#}"));
    if let Some(msg) = &fatal {
        summary.fatal(msg);
    }
    summary.wall_time_ms = started.elapsed().as_millis();
    if let Err(e) = summary.write(out) {
        log::error!("could not write run summary: {e:#}");
    }
    match fatal {
        Some(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
        None => ExitCode::SUCCESS,
    }
}
