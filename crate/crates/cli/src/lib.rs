//! Command-line front end for `dtree-mcmc`: `fit`, `cv`, `compare`, `bench`
//! and `predict`, driven by a flat config file plus flag overrides.

pub mod commands;
pub mod config;
pub mod error;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_bench, cmd_compare, cmd_cv, cmd_fit, cmd_predict, Outcome};
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "dtmcmc", version, about = "Bayesian classification trees sampled by MCMC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample trees on the whole dataset.
    Fit(CommonArgs),
    /// k-fold cross-validation of the posterior ensemble.
    Cv(CommonArgs),
    /// Serial versus parallel equivalence test over k folds.
    Compare(CommonArgs),
    /// Wall-clock speedup per core count.
    Bench(CommonArgs),
    /// Predict rows of a CSV with a saved samples file.
    Predict(CommonArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_col: Option<String>,
    #[arg(long)]
    pub cores: Option<usize>,
    /// Comma-separated core counts for compare and bench.
    #[arg(long)]
    pub core_list: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Samples file for predict.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl CommonArgs {
    /// Config file values with flag overrides applied.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut pairs = match &self.config {
            Some(path) => config::read_pairs(path)?,
            None => BTreeMap::new(),
        };
        let mut put = |k: &str, v: String| {
            pairs.insert(k.to_string(), v);
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {kv:?}")))?;
            put(k.trim(), v.trim().to_string());
        }
        let flags = [
            ("data", self.data.as_ref().map(|p| p.display().to_string())),
            ("label_col", self.label_col.clone()),
            ("cores", self.cores.map(|v| v.to_string())),
            ("core_list", self.core_list.clone()),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("folds", self.folds.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("samples", self.samples.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                put(key, v);
            }
        }
        RunConfig::from_pairs(&pairs)
    }
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Fit(a) => cmd_fit(&a.resolve()?),
        Command::Cv(a) => cmd_cv(&a.resolve()?),
        Command::Compare(a) => cmd_compare(&a.resolve()?),
        Command::Bench(a) => cmd_bench(&a.resolve()?),
        Command::Predict(a) => cmd_predict(&a.resolve()?),
    }
}
