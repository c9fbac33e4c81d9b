//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 unreadable input (bad flags,
//! DAG syntax, CSV or data errors), 3 no valid adjustment set (or an invalid
//! set passed to `dag adjust`), 4 an `effect` override set that fails the
//! adjustment check.
//!
//! The seed defaults to [`DEFAULT_SEED`]; the `GLMCAUSAL_SEED` environment
//! variable overrides it and `--seed` overrides both.

mod commands;

pub use commands::{cmd_dag, cmd_effect, cmd_fit, cmd_simulate};

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::causal::CausalError;
use crate::dag::DagError;
use crate::glm::{Family, GlmError};
use crate::predict::{Criterion, Method, Metric, PredictError};
use crate::sim::SimError;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(e: std::io::Error) -> Self {
        Self::new(1, format!("i/o error: {e}"))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<DagError> for CliError {
    fn from(e: DagError) -> Self {
        Self::new(2, e.to_string())
    }
}

impl From<GlmError> for CliError {
    fn from(e: GlmError) -> Self {
        let code = match e {
            GlmError::NotConverged { .. } => 1,
            _ => 2,
        };
        Self::new(code, e.to_string())
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::Glm(g) => g.into(),
            other => Self::new(2, other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        Self::new(2, e.to_string())
    }
}

impl From<CausalError> for CliError {
    fn from(e: CausalError) -> Self {
        let code = match &e {
            CausalError::NoValidSet { .. } => 3,
            CausalError::InvalidOverride { .. } => 4,
            CausalError::Glm(GlmError::NotConverged { .. }) => 1,
            CausalError::InvalidReport(_) => 1,
            _ => 2,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "glmcausal",
    version,
    about = "Prediction modelling and DAG-based causal effect estimation with GLMs"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Worker threads for candidate fits (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Random seed for simulation and fold assignment.
    #[arg(long, env = "GLMCAUSAL_SEED", default_value_t = DEFAULT_SEED, global = true)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect a causal graph.
    #[command(subcommand)]
    Dag(DagCommand),
    /// Build and evaluate a prediction model.
    Fit(FitArgs),
    /// Estimate the total causal effect of the exposure.
    Effect(EffectArgs),
    /// Simulate data from a built-in scenario or a SEM file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DagFile {
    /// DAG file in the `dag { ... }` format.
    #[arg(long)]
    pub dag: PathBuf,
    /// Exposure, overriding the file's annotation.
    #[arg(long)]
    pub exposure: Option<String>,
    /// Outcome, overriding the file's annotation.
    #[arg(long)]
    pub outcome: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum DagCommand {
    /// List paths between two nodes.
    Paths {
        #[command(flatten)]
        file: DagFile,
        /// Start node (default: exposure).
        #[arg(long)]
        from: Option<String>,
        /// End node (default: outcome).
        #[arg(long)]
        to: Option<String>,
        /// Longest path in nodes (default: all simple paths).
        #[arg(long)]
        max_length: Option<usize>,
    },
    /// Minimal adjustment sets, and the verdict for a given set.
    Adjust {
        #[command(flatten)]
        file: DagFile,
        /// Comma-separated set to check.
        #[arg(long, value_delimiter = ',')]
        set: Option<Vec<String>>,
    },
    /// Conditional independencies implied by the graph, optionally tested
    /// against data.
    Independencies {
        #[command(flatten)]
        file: DagFile,
        #[arg(long, default_value_t = 3)]
        max_set_size: usize,
        /// CSV to test the independencies on.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
    /// Role of each node relative to exposure and outcome.
    Classify {
        #[command(flatten)]
        file: DagFile,
        /// Single node to classify (default: all).
        #[arg(long)]
        node: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Select {
    None,
    BestSubsets,
    Forward,
    Backward,
    Lasso,
    LassoBackward,
}

impl Select {
    fn method(self) -> Option<Method> {
        match self {
            Select::None => None,
            Select::BestSubsets => Some(Method::BestSubsets),
            Select::Forward => Some(Method::Forward),
            Select::Backward => Some(Method::Backward),
            Select::Lasso => Some(Method::Lasso),
            Select::LassoBackward => Some(Method::LassoBackward),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training data CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub outcome: String,
    /// Comma-separated candidate terms (`x`, `log(x)`, `z(x)`); default is
    /// every other column.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<String>>,
    #[arg(long, default_value = "gaussian", value_parser = parse_family)]
    pub family: Family,
    #[arg(long, value_enum, default_value_t = Select::None)]
    pub select: Select,
    #[arg(long, default_value = "aic", value_parser = parse_criterion)]
    pub criterion: Criterion,
    /// Folds for cross-validated evaluation and LASSO penalty choice.
    #[arg(long)]
    pub cv: Option<usize>,
    /// Evaluation metric (default: rmse, or auc for binomial).
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
    /// Held-out CSV for external evaluation.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    /// Choose the LASSO penalty by the one-standard-error rule.
    #[arg(long)]
    pub one_se: bool,
}

#[derive(Debug, Args)]
pub struct EffectArgs {
    #[command(flatten)]
    pub file: DagFile,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "gaussian", value_parser = parse_family)]
    pub family: Family,
    /// Comma-separated adjustment set to use instead of the default.
    #[arg(long, value_delimiter = ',')]
    pub set: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in scenario: confounding, collider, mediator or figure1.
    #[arg(long, conflicts_with = "sem", required_unless_present = "sem")]
    pub scenario: Option<String>,
    /// SEM definition in JSON.
    #[arg(long)]
    pub sem: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    /// Output CSV; without it the CSV goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse()
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
}

/// Parses `args` (program name first) and runs the command, writing the
/// report to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write!(out, "{}", e.render()).map_err(CliError::io)
                }
                _ => Err(CliError::new(2, e.render().to_string().trim_end())),
            };
        }
    };
    match cli.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| CliError::new(1, e.to_string()))?;
            let mut buf = Vec::new();
            let result = pool.install(|| commands::dispatch(&cli, &mut buf));
            out.write_all(&buf).map_err(CliError::io)?;
            result
        }
        None => commands::dispatch(&cli, out),
    }
}
