//! `specloop` command-line driver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "specloop", version, about = "Verifier-in-the-loop JML annotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill the single specification gap of one Java file.
    Annotate(AnnotateArgs),
    /// Benchmark matrix and reports.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run tasks × strategies × runs and append records to a run log.
    Run(BenchRunArgs),
    /// Compute curves and tables from a run log.
    Report(BenchReportArgs),
}

#[derive(Args)]
pub struct AnnotateArgs {
    /// Partially annotated Java source.
    pub file: PathBuf,
    /// `feedback:K`, `sampling:N` or `mixed:SxF`.
    #[arg(long)]
    pub strategy: String,
    #[arg(long)]
    pub config: PathBuf,
    /// Callee whose contract is missing (contract gaps).
    #[arg(long)]
    pub gap_hint: Option<String>,
    /// Method named in the prompt, when detection is not wanted.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; defaults to `<stem>.annotated.java` beside the input.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchRunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated strategy specs.
    #[arg(long, value_delimiter = ',', required = true)]
    pub strategies: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub runs: u32,
    /// Run log (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Keep existing records and run only the missing cells.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveKind {
    Steps,
    TokenRatio,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    Mixed,
}

#[derive(Args)]
pub struct BenchReportArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long = "curve", value_enum)]
    pub curves: Vec<CurveKind>,
    #[arg(long, default_value_t = specloop_core::bench::DEFAULT_MAX_RATIO)]
    pub max_ratio: f64,
    #[arg(long = "table", value_enum)]
    pub tables: Vec<TableKind>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Annotate(args) => commands::annotate(&args),
        Command::Bench(BenchCommand::Run(args)) => commands::bench_run(&args),
        Command::Bench(BenchCommand::Report(args)) => commands::bench_report(&args),
    };
    match result {
        Ok(status) => ExitCode::from(status.code()),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.status.code())
        }
    }
}
