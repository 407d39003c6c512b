//! Reproduction harness around `cfusion`: scenario configs, experiment
//! runners and CSV artifacts. Every artifact except the wall-clock tables is
//! a pure function of the configuration and the seed.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod compare;
pub mod config;
pub mod impute;
pub mod mse;
pub mod nonlinear;
pub mod toy;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Sampler { context: String, source: cfusion::Error },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Attach scenario context to a sampler error.
pub(crate) trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for cfusion::Result<T> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| HarnessError::Sampler { context: what.to_string(), source })
    }
}

#[derive(Debug, Parser)]
#[command(name = "cfusion", version, about = "Constrained fusion sampling experiments")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// master seed, overriding the configuration
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// directory for the CSV artifacts
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// worker threads (defaults to the number of cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// KS check of the two-component Student-T toy problem
    Toy(ToyArgs),
    /// error curves of CF, IS, MH and CHMC against quadrature truth
    Compare(CompareArgs),
    /// mode coverage on the mean and variance constrained problem
    Nonlinear(NonlinearArgs),
    /// cost per effective sample
    Timing(TimingArgs),
    /// MSE gain of conditioning predictors on their sum
    MseTable(MseArgs),
    /// sequential constrained imputation of an AR model with GenLog errors
    Impute(ImputeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CompareArgs {
    /// genlog, student_t or gaussian
    #[arg(long)]
    pub scenario: Option<config::ScenarioId>,
    /// comma separated sample sizes
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NonlinearArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TimingArgs {
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MseArgs {
    #[arg(long)]
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub input: Option<PathBuf>,
}

impl Command {
    /// Fold command-line overrides into `cfg`.
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        match self {
            Command::Toy(a) => {
                set(&mut cfg.toy.n, a.n);
                set(&mut cfg.toy.replicates, a.replicates);
            }
            Command::Compare(a) => {
                set(&mut cfg.compare.scenario, a.scenario);
                set(&mut cfg.compare.grid, a.grid.clone());
            }
            Command::Nonlinear(a) => {
                set(&mut cfg.nonlinear.n, a.n);
                set(&mut cfg.nonlinear.replicates, a.replicates);
            }
            Command::Timing(a) => set(&mut cfg.timing.n, a.n),
            Command::MseTable(a) => set(&mut cfg.mse_table.draws, a.draws),
            Command::Impute(a) => {
                set(&mut cfg.impute.paths, a.paths);
                set(&mut cfg.impute.steps, a.steps);
                if a.input.is_some() {
                    cfg.impute.input = a.input.clone();
                }
            }
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
    /// false for tables that contain wall-clock measurements
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub artifacts: Vec<Artifact>,
    /// human-readable summary for the terminal
    pub report: String,
}

pub fn run(command: &Command, cfg: &ExperimentConfig) -> Result<Output> {
    match command {
        Command::Toy(_) => toy::run(&cfg.toy, cfg.seed),
        Command::Compare(_) => compare::run_compare(&cfg.compare, cfg.seed),
        Command::Nonlinear(_) => nonlinear::run(&cfg.nonlinear, cfg.seed),
        Command::Timing(_) => compare::run_timing(&cfg.timing, &cfg.nonlinear, cfg.seed),
        Command::MseTable(_) => mse::run(&cfg.mse_table, cfg.seed),
        Command::Impute(_) => impute::run(&cfg.impute, cfg.seed),
    }
}

/// Write the artifacts of `output` into `dir`.
pub fn write_artifacts(output: &Output, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in &output.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}

/// Render rows as CSV.
pub(crate) fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Shortest round-trip representation, stable across platforms.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

/// A child seed for cell `index` of an experiment.
pub(crate) fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    cfusion::fusion::stream_rng(seed, index).next_u64()
}
