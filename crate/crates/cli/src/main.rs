//! `hems`: data preparation, benchmarks, DDPG training, analytics and
//! reports for prosumer households.

mod commands;
mod config;
mod report;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Preset, SweepPreset, TariffPreset};

#[derive(Parser)]
#[command(name = "hems", version, about = "Household energy management with PV, battery and EV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic household.
    Generate(GenerateArgs),
    /// Turn a 15-minute measurement CSV into household directories.
    Ingest(IngestArgs),
    /// Write the train/eval/test split of a household.
    Split(RunArgs),
    /// Run the rule-based lower benchmark on every split.
    SimulateRbpm(RunArgs),
    /// Solve the full-information LP upper benchmark on every split.
    SolveMpc(RunArgs),
    /// Train DDPG agents.
    Train(TrainArgs),
    /// Evaluate trained agents on the eval and test splits.
    Evaluate(EvaluateArgs),
    /// EV behavior clustering and grid-savings estimates from measurements.
    Analyze(AnalyzeArgs),
    /// Write the high-potential variant of a household.
    Synth(RunArgs),
    /// Train and evaluate a hyperparameter sweep.
    Sweep(SweepArgs),
    /// Assemble benchmark and agent metrics into one table.
    Report(ReportArgs),
    /// Per-hour trace of one calendar day under one policy.
    TraceDay(TraceDayArgs),
}

#[derive(Args, Clone)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides HEMS_OUT and the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    tariff: Option<TariffPreset>,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 365)]
    days: usize,
    /// Apply the high-potential transform to the generated household.
    #[arg(long)]
    synth: bool,
}

#[derive(Args)]
pub struct IngestArgs {
    #[command(flatten)]
    common: Common,
    /// Measurement CSV.
    #[arg(long)]
    data: PathBuf,
    /// Transaction CSV; transactions are derived from the readings otherwise.
    #[arg(long)]
    transactions: Option<PathBuf>,
    /// BESS capacity for households without a reference setup.
    #[arg(long)]
    bess_kwh: Option<f64>,
    #[arg(long)]
    bess_kw: Option<f64>,
    #[arg(long)]
    charger_kw: Option<f64>,
    /// Longest gap in hours that is interpolated.
    #[arg(long, default_value_t = 5)]
    max_gap_h: usize,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Household directory.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Base seed; seed i of a multi-seed run is base + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds to train.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Checkpoints to evaluate; defaults to every checkpoint under OUT/agents.
    #[arg(long)]
    agent: Vec<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Measurement CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    transactions: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    sweep: Option<SweepPreset>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seeds per configuration in the first pass.
    #[arg(long)]
    seeds: Option<usize>,
    /// Grid configurations rerun in the second pass.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    final_seeds: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Print the configurations without training.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Run directories holding metrics_*.csv files.
    #[arg(long, required = true)]
    run: Vec<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Rbpm,
    Mpc,
    Ddpg,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Rbpm => "rbpm",
            PolicyKind::Mpc => "mpc",
            PolicyKind::Ddpg => "ddpg",
        }
    }
}

#[derive(Args)]
pub struct TraceDayArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Calendar day, YYYY-MM-DD.
    #[arg(long)]
    date: chrono::NaiveDate,
    #[arg(long, value_enum)]
    policy: PolicyKind,
    /// Checkpoint for the ddpg policy.
    #[arg(long)]
    agent: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Split(a) => commands::split(a),
        Command::SimulateRbpm(a) => commands::benchmark(a, PolicyKind::Rbpm),
        Command::SolveMpc(a) => commands::benchmark(a, PolicyKind::Mpc),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Synth(a) => commands::synth(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Report(a) => commands::report(a),
        Command::TraceDay(a) => commands::trace_day(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<commands::UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
