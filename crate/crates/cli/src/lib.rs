//! The `ragatr` command line and HTTP service.

mod commands;
pub mod config;
mod error;
pub mod retrieve;
pub mod service;

use std::ffi::OsString;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
pub use config::{ConfigArgs, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ragatr", version, about = "Exemplar retrieval, grounded answers and evaluation for SAR target recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index from a manifest and embeddings and write a snapshot.
    Ingest(ConfigArgs),
    /// Print the nearest exemplars of one query vector.
    Query(QueryArgs),
    /// Run repeated split evaluations and write the metric report.
    Eval(ConfigArgs),
    /// Project a snapshot to 2-D and write the points as CSV.
    Project(ProjectArgs),
    /// Serve retrieval and answers over HTTP.
    Serve(ServeArgs),
    /// Write a synthetic corpus (manifest, embeddings, specs).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Lines,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub snapshot_path: PathBuf,
    /// Comma-separated components.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub vec: Option<Vec<f32>>,
    /// File holding a JSON array or whitespace/comma-separated components.
    #[arg(long)]
    pub vec_file: Option<PathBuf>,
    /// Query with the embedding of an indexed record.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, default_value_t = ragatr_core::rag::DEFAULT_K)]
    pub k: usize,
    #[arg(long)]
    pub filter: Vec<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub snapshot_path: PathBuf,
    /// `tsne` or `pca`.
    #[arg(long, default_value = "tsne")]
    pub method: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port; the bound address is printed on startup.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 9)]
    pub classes: usize,
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Cluster concentration; 0 gives pure noise.
    #[arg(long, default_value_t = 10.0)]
    pub concentration: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&RunConfig::resolve(a)?),
        Command::Query(a) => commands::query(a),
        Command::Eval(a) => commands::eval(&RunConfig::resolve(a)?),
        Command::Project(a) => commands::project(a),
        Command::Serve(a) => commands::serve(a, &RunConfig::resolve(&a.config)?),
        Command::Synth(a) => commands::synth(a),
    }
}

fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("RAGATR_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses `args` and runs the command. Exit codes: 0 success, 1 usage or
/// data error, 2 internal error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_tracing();
    match panic::catch_unwind(AssertUnwindSafe(|| dispatch(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit()
        }
        Err(_) => {
            eprintln!("error: internal error (panic)");
            ExitCode::from(2)
        }
    }
}
