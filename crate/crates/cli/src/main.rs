//! `conlearn`: train predictive models, solve optimization problems with the
//! models embedded, export the assembled formulation, and run the
//! experiment suites.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conlearn::trainers::ModelClass;

use config::{FileConfig, Instance, Mode, Policy, Suite};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Data(#[from] conlearn::data::DataError),
    #[error(transparent)]
    Train(#[from] conlearn::trainers::TrainError),
    #[error(transparent)]
    Document(#[from] conlearn::model_ir::SchemaError),
    #[error(transparent)]
    Pipeline(#[from] conlearn::pipeline::PipelineError),
    #[error(transparent)]
    ColumnSelection(#[from] conlearn::column_selection::ColumnSelectionError),
    #[error(transparent)]
    Wfp(#[from] conlearn::wfp::WfpError),
    #[error(transparent)]
    Lp(#[from] conlearn_mio::LpFileError),
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Debug, Parser)]
#[command(name = "conlearn", version, about = "Constraint learning: train, embed, optimize")]
pub struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel solves and training.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for folds, clustering and experiment repetitions.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select a model class by cross-validation and write the fitted model.
    Train(TrainArgs),
    /// Assemble and solve a problem and write the solve report.
    Solve(SolveArgs),
    /// Assemble a problem and write it as an LP file.
    Export(ExportArgs),
    /// Run an experiment suite and write its CSV tables.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV; simulated baskets are used when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON manifest naming the CSV's columns.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Rows to simulate.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Outcome column to model.
    #[arg(long)]
    pub outcome: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Candidate classes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<ModelClass>>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub instance: Option<Instance>,
    /// Model document to embed instead of training one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Class to train when no model document is given.
    #[arg(long)]
    pub class: Option<ModelClass>,
    #[arg(long)]
    pub network_seed: Option<u64>,
    /// Bound on the learned outcome.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub trust_region: Option<Policy>,
    /// Clusters for union trust regions and clustered solves.
    #[arg(long)]
    pub k: Option<usize>,
    /// Fraction of forest members allowed to violate the bound.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Perturb the costs with this seed.
    #[arg(long)]
    pub cost_seed: Option<u64>,
    /// Solver time limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// LP file to write; defaults to `model.lp` in the output directory.
    #[arg(long)]
    pub lp: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub suite: Option<Suite>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub network_seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<ModelClass>>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Use the data hull in the violation-limit sweep.
    #[arg(long)]
    pub trust_region: Option<bool>,
    /// Sample counts of the column-selection scaling run.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Tree depths of the leaf-depth run.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Features of the column-selection instances.
    #[arg(long)]
    pub features: Option<usize>,
    /// Learned rows of the column-selection instances.
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(config::existing(p)?)?,
        None => FileConfig::default(),
    };
    let ctx = commands::Context::new(&cli, file)?;
    match &cli.command {
        Command::Train(a) => commands::train(&ctx, a),
        Command::Solve(a) => commands::solve(&ctx, a),
        Command::Export(a) => commands::export(&ctx, a),
        Command::Experiment(a) => commands::experiment(&ctx, a),
    }
}
