//! k-fold cross-validation of a sampler and the serial-vs-parallel
//! equivalence comparison built on it.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ensemble::Ensemble;
use super::metrics::{classification_metrics, macro_f1_present, MetricsReport};
use super::ttest::{welch_t_test, TTestResult};
use crate::data::{kfold_split, stratified_kfold_split, Dataset};
use crate::error::{Error, Result};
use crate::sampler::{run_parallel, run_serial, ChainConfig, ChainResult};
use crate::scalar::Scalar;
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplerKind {
    Serial,
    Parallel { workers: usize },
}

impl SamplerKind {
    pub fn from_cores(cores: usize) -> Self {
        if cores <= 1 {
            SamplerKind::Serial
        } else {
            SamplerKind::Parallel { workers: cores }
        }
    }

    pub fn cores(self) -> usize {
        match self {
            SamplerKind::Serial => 1,
            SamplerKind::Parallel { workers } => workers,
        }
    }

    pub fn run<F: Scalar>(self, dataset: &Dataset<F>, config: &ChainConfig) -> Result<ChainResult<F>> {
        match self {
            SamplerKind::Serial => run_serial(dataset, config),
            SamplerKind::Parallel { workers } => run_parallel(dataset, &ChainConfig { workers, ..config.clone() }),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerKind::Serial => write!(f, "1"),
            SamplerKind::Parallel { workers } => write!(f, "{workers}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub stratified: bool,
    pub split_seed: u64,
    pub chain: ChainConfig,
    pub sampler: SamplerKind,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 25,
            stratified: false,
            split_seed: 0,
            chain: ChainConfig::default(),
            sampler: SamplerKind::Serial,
        }
    }
}

/// Chain seed for fold `fold` of a run seeded with `seed`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold_index: usize,
    pub chain_seed: u64,
    pub test_indices: Vec<usize>,
    pub truth: Vec<usize>,
    /// Ensemble predictions for the test rows.
    pub predictions: Vec<usize>,
    pub metrics: MetricsReport,
    /// Test-set macro F1 of every collected sample.
    pub sample_f1: Vec<f64>,
    pub n_samples: usize,
    pub n_unique_trees: usize,
    pub fresh_acceptances: usize,
    pub acceptance_rate: f64,
    pub convergence_iteration: Option<usize>,
    pub iterations_run: usize,
}

impl FoldOutcome {
    pub fn mean_sample_f1(&self) -> f64 {
        self.sample_f1.iter().sum::<f64>() / self.sample_f1.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub sampler: SamplerKind,
    pub folds: Vec<FoldOutcome>,
    /// Metrics over the concatenated test predictions of all folds.
    pub pooled: MetricsReport,
}

impl CvReport {
    pub fn pooled_sample_f1(&self) -> Vec<f64> {
        self.folds.iter().flat_map(|f| f.sample_f1.iter().copied()).collect()
    }

    pub fn fold_mean_f1(&self) -> Vec<f64> {
        self.folds.iter().map(FoldOutcome::mean_sample_f1).collect()
    }

    pub fn mean_fold_accuracy(&self) -> f64 {
        self.folds.iter().map(|f| f.metrics.accuracy).sum::<f64>() / self.folds.len() as f64
    }
}

fn score_fold<F: Scalar>(
    fold_index: usize,
    chain_seed: u64,
    test_indices: Vec<usize>,
    test: &Dataset<F>,
    result: &ChainResult<F>,
    eps: F,
) -> Result<FoldOutcome> {
    let trees = result.sample_trees();
    let ensemble = Ensemble::new(&trees, eps)?;
    let predictions = ensemble.predict_labels(test);
    let truth = test.labels().to_vec();
    let l = test.n_classes();
    let mut cache: HashMap<*const Tree<F>, f64> = HashMap::new();
    let mut sample_f1 = Vec::with_capacity(trees.len());
    for tree in &trees {
        let f1 = match cache.get(&std::sync::Arc::as_ptr(tree)) {
            Some(&f) => f,
            None => {
                let pred: Vec<usize> = test.rows().map(|x| tree.predict_class(x)).collect();
                let f = macro_f1_present(&pred, &truth, l)?;
                cache.insert(std::sync::Arc::as_ptr(tree), f);
                f
            }
        };
        sample_f1.push(f1);
    }
    Ok(FoldOutcome {
        fold_index,
        chain_seed,
        metrics: classification_metrics(&predictions, &truth, l)?,
        test_indices,
        truth,
        predictions,
        sample_f1,
        n_samples: trees.len(),
        n_unique_trees: ensemble.n_unique(),
        fresh_acceptances: result.fresh_acceptances,
        acceptance_rate: result.acceptance_rate,
        convergence_iteration: result.convergence_iteration,
        iterations_run: result.iterations_run,
    })
}

/// Runs the configured sampler on each training fold and scores the
/// posterior ensemble and every collected sample on the held-out fold.
pub fn cross_validate<F: Scalar>(dataset: &Dataset<F>, config: &CvConfig) -> Result<CvReport> {
    config.chain.validate()?;
    let splits = if config.stratified {
        stratified_kfold_split(dataset, config.folds, config.split_seed)?
    } else {
        kfold_split(dataset, config.folds, config.split_seed)?
    };
    let eps = F::of(config.chain.prior.smoothing_eps);
    let mut folds = Vec::with_capacity(splits.len());
    for split in &splits {
        let train = split.train_set(dataset);
        let test = split.test_set(dataset);
        let chain_seed = fold_seed(config.chain.seed, split.fold_index);
        let chain = ChainConfig {
            seed: chain_seed,
            ..config.chain.clone()
        };
        let result = config.sampler.run(&train, &chain)?;
        if result.samples.is_empty() {
            return Err(Error::NoSamples);
        }
        log::debug!(
            "fold {} sampler {}: {} samples, acceptance {:.3}",
            split.fold_index,
            config.sampler,
            result.samples.len(),
            result.acceptance_rate
        );
        folds.push(score_fold(split.fold_index, chain_seed, split.test.clone(), &test, &result, eps)?);
    }
    let predictions: Vec<usize> = folds.iter().flat_map(|f| f.predictions.iter().copied()).collect();
    let truth: Vec<usize> = folds.iter().flat_map(|f| f.truth.iter().copied()).collect();
    Ok(CvReport {
        sampler: config.sampler,
        pooled: classification_metrics(&predictions, &truth, dataset.n_classes())?,
        folds,
    })
}

/// Which values of each arm enter the t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EquivalenceInput {
    /// Test-set F1 of `per_fold` evenly spaced collected samples from
    /// each fold, pooled over folds.
    ThinnedSampleF1 { per_fold: usize },
    /// Test-set F1 of every collected sample, pooled over folds.
    SampleF1,
    /// One mean sample F1 per fold.
    #[default]
    FoldMeans,
}

impl EquivalenceInput {
    pub fn values(self, report: &CvReport) -> Vec<f64> {
        match self {
            EquivalenceInput::ThinnedSampleF1 { per_fold } => report
                .folds
                .iter()
                .flat_map(|f| thin(&f.sample_f1, per_fold))
                .collect(),
            EquivalenceInput::SampleF1 => report.pooled_sample_f1(),
            EquivalenceInput::FoldMeans => report.fold_mean_f1(),
        }
    }
}

impl fmt::Display for EquivalenceInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquivalenceInput::ThinnedSampleF1 { per_fold } => write!(f, "thinned:{per_fold}"),
            EquivalenceInput::SampleF1 => write!(f, "samples"),
            EquivalenceInput::FoldMeans => write!(f, "fold_means"),
        }
    }
}

impl std::str::FromStr for EquivalenceInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "samples" => Ok(EquivalenceInput::SampleF1),
            "fold_means" => Ok(EquivalenceInput::FoldMeans),
            _ => s
                .strip_prefix("thinned:")
                .and_then(|n| n.parse().ok())
                .filter(|&n| n > 0)
                .map(|per_fold| EquivalenceInput::ThinnedSampleF1 { per_fold })
                .ok_or_else(|| Error::Config(format!("unknown equivalence input {s:?}"))),
        }
    }
}

/// `m` evenly spaced values of `xs` (all of them when `m >= xs.len()`).
fn thin(xs: &[f64], m: usize) -> Vec<f64> {
    if m >= xs.len() {
        return xs.to_vec();
    }
    (0..m).map(|i| xs[i * xs.len() / m]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub first: SamplerKind,
    pub second: SamplerKind,
    pub mean_first: f64,
    pub mean_second: f64,
    pub test: TTestResult<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub input: EquivalenceInput,
    pub significance: f64,
    pub rows: Vec<CompareRow>,
    pub reports: Vec<CvReport>,
}

/// Cross-validates the serial sampler and one parallel sampler per distinct
/// entry of `cases` above 1, then t-tests serial against each case and each pair of
/// cases.
///
/// Every arm collects the same number of samples per fold: the base
/// `target_samples`, or the serial post-burn-in length when unset.
pub fn compare_samplers<F: Scalar>(
    dataset: &Dataset<F>,
    base: &CvConfig,
    cases: &[usize],
    input: EquivalenceInput,
    significance: f64,
) -> Result<CompareReport> {
    if cases.is_empty() {
        return Err(Error::Config("compare needs at least one core count".into()));
    }
    if let Some(&c) = cases.iter().find(|&&c| c == 0) {
        return Err(Error::Config(format!("core count {c} must be at least 1")));
    }
    // a core count of 1 is the serial sampler itself
    let mut arms = vec![SamplerKind::Serial];
    for kind in cases.iter().map(|&c| SamplerKind::from_cores(c)) {
        if !arms.contains(&kind) {
            arms.push(kind);
        }
    }
    if arms.len() < 2 {
        return Err(Error::Config("compare needs a core count above 1".into()));
    }
    let mut base = base.clone();
    let serial_length = base.chain.iterations - base.chain.burn_in();
    base.chain.target_samples.get_or_insert(serial_length);
    let reports = arms
        .iter()
        .map(|&sampler| cross_validate(dataset, &CvConfig { sampler, ..base.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<Vec<f64>> = reports.iter().map(|r| input.values(r)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut rows = Vec::new();
    for a in 0..arms.len() {
        for b in a + 1..arms.len() {
            rows.push(CompareRow {
                first: arms[a],
                second: arms[b],
                mean_first: mean(&values[a]),
                mean_second: mean(&values[b]),
                test: welch_t_test(&values[a], &values[b], significance)?,
            });
        }
    }
    Ok(CompareReport {
        input,
        significance,
        rows,
        reports,
    })
}
