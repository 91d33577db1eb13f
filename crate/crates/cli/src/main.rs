//! `edgeent`: analyze labeled graphs, generate synthetic ones, train the
//! filter network and run improvement experiments.

mod analyze;
mod experiment;
mod generate;
mod train;

use clap::{Parser, Subcommand, ValueEnum};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "edgeent", version, about = "Edge entropy toolkit for labeled graphs")]
pub struct Cli {
    /// Random seed. Defaults to 0 (or the plan's base seed for `experiment`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections; all cores when omitted.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output format of the stdout payload.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Print progress on stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Edge entropy, intra-class ratio and clustering of a graph directory.
    Analyze(analyze::Args),
    /// Sample a synthetic labeled graph into a directory.
    Generate(generate::Args),
    /// Train one network and report its test accuracy.
    Train(train::Args),
    /// Run a plan file of improvement experiments.
    Experiment(experiment::Args),
    /// Rebuild the comparison table from a results.json.
    Report(experiment::ReportArgs),
}

/// Failure categories mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, unreadable files, invalid configuration: exit 2.
    Usage(anyhow::Error),
    /// The command ran but a check did not pass: exit 1.
    Check(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

pub struct Ctx {
    pub seed: Option<u64>,
    pub format: Format,
    pub verbose: u8,
}

impl Ctx {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn info(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn print_json(value: &impl serde::Serialize) -> CmdResult {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Ctx {
        seed: cli.seed,
        format: cli.format,
        verbose: cli.verbose,
    };
    let result = match &cli.command {
        Command::Analyze(a) => analyze::run(&ctx, a),
        Command::Generate(a) => generate::run(&ctx, a),
        Command::Train(a) => train::run(&ctx, a),
        Command::Experiment(a) => experiment::run(&ctx, a),
        Command::Report(a) => experiment::report(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
