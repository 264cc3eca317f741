use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "doping",
    version,
    about = "Cleanness falsification, emissions testing and fairness monitoring"
)]
pub struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for reports and run manifests (default: current directory).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Search a recorded trace set for a trace violating a cleanness contract.
    Falsify(FalsifyArgs),
    /// Check both cleanness clauses exhaustively on a recorded trace set.
    Oracle(OracleArgs),
    #[command(subcommand)]
    Emissions(EmissionsCommand),
    #[command(subcommand)]
    Fairness(FairnessCommand),
    /// Run the oversight HTTP service.
    Serve(ServeArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 3000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FalsifyArgs {
    #[arg(long)]
    pub contract: PathBuf,
    /// Directory of trace CSV files forming the system.
    #[arg(long)]
    pub traces: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Independent chains with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value = "report.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub contract: PathBuf,
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long, default_value = "oracle.json")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionsCommand {
    /// Predict the emission rate of a cycle from recorded trips.
    Predict(PredictArgs),
    /// Search the κi tube around a cycle for an emission rate outside the κo band.
    Falsify(EmissionsFalsifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Directory of trip CSV files.
    #[arg(long)]
    pub trips: PathBuf,
    /// Speed profile, one km/h value per line; the built-in NEDC when omitted.
    #[arg(long)]
    pub cycle: Option<PathBuf>,
    #[arg(long, default_value = "prediction.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmissionsFalsifyArgs {
    #[arg(long)]
    pub trips: PathBuf,
    #[arg(long)]
    pub cycle: Option<PathBuf>,
    #[arg(long, default_value_t = 15.0)]
    pub kappa_in: f64,
    #[arg(long, default_value_t = 88.0)]
    pub kappa_out: f64,
    /// Standard emission rate in mg/km; predicted on the cycle when omitted.
    #[arg(long)]
    pub std_output: Option<f64>,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Samples perturbed per proposal.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Largest speed offset per proposal in km/h.
    #[arg(long, default_value_t = 5.0)]
    pub step_bound: f64,
    #[arg(long, default_value = "report.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "plot.csv")]
    pub plot: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FairnessCommand {
    /// Analyse every actual input of a CSV file.
    Monitor(MonitorArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MonitorSettings {
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 50.0)]
    pub beta: f64,
    /// Largest change of one input component per proposal.
    #[arg(long, default_value_t = 0.1)]
    pub step_bound: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct MonitorArgs {
    /// `p`, `p-prime` or a table CSV (inputs then output per row).
    #[arg(long)]
    pub system: String,
    /// Fairness contract; the built-in reference contract when omitted.
    #[arg(long)]
    pub contract: Option<PathBuf>,
    /// One actual input per row; an optional `case_id` or `id` column names the case.
    #[arg(long)]
    pub inputs: PathBuf,
    #[command(flatten)]
    pub settings: MonitorSettings,
    #[arg(long, default_value = "fairness.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub system: String,
    #[arg(long)]
    pub contract: Option<PathBuf>,
    /// Audit log file; created if missing, replayed if present.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    #[command(flatten)]
    pub settings: MonitorSettings,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
