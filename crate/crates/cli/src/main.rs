//! `wits`: command-line driver for the recognition pipeline and rule engine.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.

mod commands;
mod config;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wits_core::WitsError;

#[derive(Parser)]
#[command(name = "wits", version, about = "Activity recognition and trigger-action rules for sensor streams")]
struct Cli {
    /// Log verbosity (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// HP-filter every channel of a sensor CSV.
    Filter(commands::FilterArgs),
    /// Filter, segment and featurize a sensor CSV.
    Featurize(commands::FeaturizeArgs),
    /// Train a model from features and segment labels.
    Train(commands::TrainArgs),
    /// Classify feature rows with a trained model.
    Classify(commands::ClassifyArgs),
    /// Flag abnormal feature rows.
    Detect(commands::DetectArgs),
    /// Check or run trigger-action rules.
    #[command(subcommand)]
    Rules(RulesCommand),
    /// Generate a synthetic home: sensor stream, labels and context events.
    Sim(commands::SimArgs),
    /// Compare classification results against ground truth.
    Report(report::ReportArgs),
    /// Time filter, featurize and classify on one synthetic segment.
    Latency(commands::LatencyArgs),
}

#[derive(Subcommand)]
enum RulesCommand {
    /// Parse a rule file and report how many rules it defines.
    Check(commands::RulesCheckArgs),
    /// Run rules over an event stream and write the action log.
    Run(commands::RulesRunArgs),
}

/// Error carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(WitsError),
}

impl From<WitsError> for CliError {
    fn from(e: WitsError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(WitsError::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(WitsError::Json(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(WitsError::NonConvergence { .. } | WitsError::Numerical { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Shared `--config` flag.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArg {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Filter(a) => commands::filter(a),
        Command::Featurize(a) => commands::featurize(a),
        Command::Train(a) => commands::train(a),
        Command::Classify(a) => commands::classify(a),
        Command::Detect(a) => commands::detect(a),
        Command::Rules(RulesCommand::Check(a)) => commands::rules_check(a),
        Command::Rules(RulesCommand::Run(a)) => commands::rules_run(a),
        Command::Sim(a) => commands::sim(a),
        Command::Report(a) => report::report(a),
        Command::Latency(a) => commands::latency(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wits: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
