//! `turnqual`: label, train, score, aggregate, evaluate, agreement.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "turnqual",
    version,
    about = "Turn-quality estimation from next-user weak labels"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed recorded in every output and used for training shuffles.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dialog corpus (JSONL).
    #[arg(long)]
    pub dialogs: Option<PathBuf>,
    /// Dataset manifest (JSON) with label scale and splits.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Restrict to one manifest split.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build weak or annotation labels for every labelable system turn.
    Label(commands::LabelArgs),
    /// Train a quality head and write a checkpoint plus per-epoch log.
    Train(commands::TrainArgs),
    /// Score every turn of a corpus with a checkpoint.
    Score(commands::ScoreArgs),
    /// Mean-aggregate turn scores into dialog scores.
    Aggregate(commands::AggregateArgs),
    /// Correlate score tables with human judgments.
    Evaluate(commands::EvaluateArgs),
    /// Inter-rater agreement and majority-resolved turn labels.
    Agreement(commands::AgreementArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), exit::Failure> {
    let file = config::FileConfig::load(cli.common.config.as_deref())?;
    if let Some(jobs) = cli.common.jobs.or(file.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(exit::Failure::usage)?;
    }
    let ctx = commands::Context {
        common: cli.common,
        file,
    };
    match cli.command {
        Command::Label(a) => commands::label(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Score(a) => commands::score(&ctx, a),
        Command::Aggregate(a) => commands::aggregate(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Agreement(a) => commands::agreement(&ctx, a),
    }
}
