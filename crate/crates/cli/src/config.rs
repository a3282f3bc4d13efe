//! Run configuration: a flat `key = value` file, overridden by flags.
//!
//! ```text
//! # comments and blank lines are ignored
//! data = data/wine.csv
//! label_col = class
//! iterations = 10000
//! cores = 4
//! core_list = 1,2,4,8
//! ```
//!
//! Keys: `data`, `label_col`, `out`, `samples`, `precision` (`f64`|`f32`),
//! `sampler` (`auto`|`serial`|`parallel`), `cores`, `core_list`,
//! `iterations`, `seed`, `burn_in_fraction`, `convergence_window`,
//! `convergence_tol`, `target_samples`, `progress_every`, `p_grow`,
//! `p_prune`, `p_change`, `p_swap`, `alpha`, `beta`, `smoothing_eps`,
//! `prior_mode` (`node_wise`|`whole_tree`), `threshold_domain`
//! (`per_feature`|`pooled`), `max_depth`, `folds`, `stratified`,
//! `split_seed`, `significance`, `equivalence_input`
//! (`fold_means`|`samples`|`thinned:N`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dtree_mcmc::eval::{EquivalenceInput, SamplerKind};
use dtree_mcmc::{ChainConfig, PriorMode, ThresholdDomain};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerChoice {
    /// Serial for one core, parallel otherwise.
    Auto,
    Serial,
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub label_col: String,
    pub out: PathBuf,
    pub samples: Option<PathBuf>,
    pub precision: Precision,
    pub sampler: SamplerChoice,
    pub chain: ChainConfig,
    pub core_list: Vec<usize>,
    pub folds: usize,
    pub stratified: bool,
    pub split_seed: Option<u64>,
    pub significance: f64,
    pub equivalence_input: EquivalenceInput,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            label_col: "class".into(),
            out: PathBuf::from("out"),
            samples: None,
            precision: Precision::F64,
            sampler: SamplerChoice::Auto,
            chain: ChainConfig::default(),
            core_list: Vec::new(),
            folds: 25,
            stratified: false,
            split_seed: None,
            significance: 0.05,
            equivalence_input: EquivalenceInput::default(),
        }
    }
}

/// Parses `key = value` lines. Later keys replace earlier ones.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut pairs = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {line:?}", n + 1)))?;
        pairs.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_pairs(&text)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError> {
    match value {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

pub fn parse_core_list(value: &str) -> Result<Vec<usize>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse("core_list", s))
        .collect()
}

impl RunConfig {
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        for (key, value) in pairs {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "data" => c.data = Some(PathBuf::from(v)),
                "label_col" => c.label_col = v.to_string(),
                "out" => c.out = PathBuf::from(v),
                "samples" => c.samples = Some(PathBuf::from(v)),
                "precision" => {
                    c.precision = match v {
                        "f64" => Precision::F64,
                        "f32" => Precision::F32,
                        _ => return Err(CliError::Config(format!("precision: expected f64 or f32, got {v:?}"))),
                    }
                }
                "sampler" => {
                    c.sampler = match v {
                        "auto" => SamplerChoice::Auto,
                        "serial" => SamplerChoice::Serial,
                        "parallel" => SamplerChoice::Parallel,
                        _ => return Err(CliError::Config(format!("sampler: expected auto, serial or parallel, got {v:?}"))),
                    }
                }
                "cores" | "workers" => c.chain.workers = parse(k, v)?,
                "core_list" => c.core_list = parse_core_list(v)?,
                "iterations" => c.chain.iterations = parse(k, v)?,
                "seed" => c.chain.seed = parse(k, v)?,
                "burn_in_fraction" => c.chain.burn_in_fraction = parse(k, v)?,
                "convergence_window" => c.chain.convergence_window = parse(k, v)?,
                "convergence_tol" => c.chain.convergence_tol = parse(k, v)?,
                "target_samples" => c.chain.target_samples = optional(k, v)?,
                "progress_every" => c.chain.progress_every = optional(k, v)?,
                "p_grow" => c.chain.move_probs.grow = parse(k, v)?,
                "p_prune" => c.chain.move_probs.prune = parse(k, v)?,
                "p_change" => c.chain.move_probs.change = parse(k, v)?,
                "p_swap" => c.chain.move_probs.swap = parse(k, v)?,
                "alpha" => c.chain.prior.alpha = parse(k, v)?,
                "beta" => c.chain.prior.beta = parse(k, v)?,
                "smoothing_eps" => c.chain.prior.smoothing_eps = parse(k, v)?,
                "prior_mode" => {
                    c.chain.prior.mode = match v {
                        "node_wise" => PriorMode::NodeWise,
                        "whole_tree" => PriorMode::WholeTree,
                        _ => return Err(CliError::Config(format!("prior_mode: unknown mode {v:?}"))),
                    }
                }
                "threshold_domain" => {
                    c.chain.prior.threshold_domain = match v {
                        "per_feature" => ThresholdDomain::PerFeature,
                        "pooled" => ThresholdDomain::Pooled,
                        _ => return Err(CliError::Config(format!("threshold_domain: unknown domain {v:?}"))),
                    }
                }
                "max_depth" => c.chain.prior.max_depth = optional(k, v)?,
                "folds" => c.folds = parse(k, v)?,
                "stratified" => c.stratified = parse(k, v)?,
                "split_seed" => c.split_seed = optional(k, v)?,
                "significance" => c.significance = parse(k, v)?,
                "equivalence_input" => c.equivalence_input = v.parse().map_err(CliError::from)?,
                _ => return Err(CliError::Config(format!("unknown config key {key:?}"))),
            }
        }
        Ok(c)
    }

    pub fn validate_chain(&self) -> Result<(), CliError> {
        self.chain.validate().map_err(CliError::from)
    }

    pub fn validate_folds(&self) -> Result<(), CliError> {
        if self.folds < 2 {
            return Err(CliError::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        Ok(())
    }

    pub fn validate_core_list(&self) -> Result<(), CliError> {
        if self.core_list.is_empty() {
            return Err(CliError::Config("core_list is empty".into()));
        }
        if self.core_list.contains(&0) {
            return Err(CliError::Config("core_list entries must be at least 1".into()));
        }
        Ok(())
    }

    /// The dataset path, checked to exist.
    pub fn data_path(&self) -> Result<&Path, CliError> {
        let path = self
            .data
            .as_deref()
            .ok_or_else(|| CliError::Config("no dataset given (set `data` or pass --data)".into()))?;
        existing(path)
    }

    pub fn samples_path(&self) -> Result<&Path, CliError> {
        let path = self
            .samples
            .as_deref()
            .ok_or_else(|| CliError::Config("no samples file given (set `samples` or pass --samples)".into()))?;
        existing(path)
    }

    pub fn sampler_kind(&self) -> SamplerKind {
        match self.sampler {
            SamplerChoice::Auto => SamplerKind::from_cores(self.chain.workers),
            SamplerChoice::Serial => SamplerKind::Serial,
            SamplerChoice::Parallel => SamplerKind::Parallel {
                workers: self.chain.workers,
            },
        }
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.chain.seed)
    }
}

fn existing(path: &Path) -> Result<&Path, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Config(format!("{} does not exist", path.display())))
    }
}
