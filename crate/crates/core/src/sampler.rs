//! Serial Metropolis-Hastings and the single-chain parallel sampler.
//!
//! Both samplers start from the same initial tree (drawn from the
//! `INIT_STREAM` stream) and take every random number from
//! [`stream_rng`](crate::rng::stream_rng), so a run is a pure function of
//! the dataset and the [`ChainConfig`].
//!
//! The parallel sampler has two phases. Until the monitored F1 settles, each
//! iteration moves to the best of `C` candidates. Once it settles, one
//! uniform `u` is drawn per iteration and every worker slot yields a sample:
//! its candidate when `alpha_j > u`, the current tree otherwise.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitSpace};
use crate::error::{Error, Result};
use crate::eval::macro_f1_from_counts;
use crate::moves::{propose, MoveProbabilities};
use crate::posterior::{log_posterior, PriorConfig};
use crate::rng::{accept_uniform, stream_rng, INIT_STREAM};
use crate::scalar::Scalar;
use crate::tree::{argmax_u64, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub iterations: usize,
    pub workers: usize,
    pub move_probs: MoveProbabilities,
    pub prior: PriorConfig,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    /// Serial sampler only; the parallel sampler's burn-in ends at convergence.
    pub burn_in_fraction: f64,
    pub seed: u64,
    pub target_samples: Option<usize>,
    /// Log a progress line every this many iterations.
    pub progress_every: Option<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            workers: 1,
            move_probs: MoveProbabilities::default(),
            prior: PriorConfig::default(),
            convergence_window: 100,
            convergence_tol: 0.03,
            burn_in_fraction: 0.3,
            seed: 0,
            target_samples: None,
            progress_every: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.iterations == 0 {
            return fail("iterations must be positive".into());
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if self.convergence_window < 2 {
            return fail(format!("convergence window {} is below 2", self.convergence_window));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol < 1.0) {
            return fail(format!("convergence tolerance {} is outside (0, 1)", self.convergence_tol));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return fail(format!("burn-in fraction {} is outside [0, 1)", self.burn_in_fraction));
        }
        if self.target_samples == Some(0) {
            return fail("target_samples must be positive when set".into());
        }
        if self.progress_every == Some(0) {
            return fail("progress_every must be positive when set".into());
        }
        self.move_probs.validate()?;
        self.prior.validate()
    }

    /// Number of leading serial iterations discarded.
    pub fn burn_in(&self) -> usize {
        (self.burn_in_fraction * self.iterations as f64).floor() as usize
    }
}

/// Data the per-iteration F1 is measured on.
#[derive(Debug, Clone, Copy, Default)]
pub enum F1Source<'a, F> {
    /// The leaf counts of the tree itself.
    #[default]
    Training,
    Holdout(&'a Dataset<F>),
}

#[derive(Debug, Clone)]
pub struct Sample<F> {
    pub tree: Arc<Tree<F>>,
    pub log_posterior: F,
    pub iteration: usize,
    /// Whether this is a newly accepted candidate rather than a repeat.
    pub fresh: bool,
}

#[derive(Debug, Clone)]
pub struct ChainResult<F> {
    pub samples: Vec<Sample<F>>,
    pub f1_history: Vec<F>,
    /// Serial: alpha of the proposal. Parallel: the largest alpha.
    pub alpha_history: Vec<F>,
    pub log_posterior_history: Vec<F>,
    /// Fresh candidates collected per iteration.
    pub yield_history: Vec<usize>,
    /// Fresh acceptances over proposal slots in the collection phase.
    pub acceptance_rate: f64,
    pub fresh_acceptances: usize,
    pub convergence_iteration: Option<usize>,
    /// First iteration whose states were collected.
    pub collection_start: Option<usize>,
    pub wall_clock_seconds: f64,
    pub iterations_run: usize,
    pub workers: usize,
    pub final_tree: Arc<Tree<F>>,
}

impl<F: Scalar> ChainResult<F> {
    pub fn sample_trees(&self) -> Vec<Arc<Tree<F>>> {
        self.samples.iter().map(|s| Arc::clone(&s.tree)).collect()
    }
}

/// Whether every value of `window` lies within `tol` of the window mean.
pub fn window_converged<F: Scalar>(window: &[F], tol: f64) -> bool {
    if window.is_empty() {
        return false;
    }
    let mean = window.iter().copied().sum::<F>() / F::of_usize(window.len());
    let (lo, hi) = (mean * F::of(1.0 - tol), mean * F::of(1.0 + tol));
    window.iter().all(|&v| v >= lo && v <= hi)
}

/// First index `t` at which the trailing `w` values have settled.
pub fn check_convergence<F: Scalar>(f1_history: &[F], w: usize, tol: f64) -> Option<usize> {
    if w == 0 || f1_history.len() < w {
        return None;
    }
    (w - 1..f1_history.len()).find(|&t| window_converged(&f1_history[t + 1 - w..=t], tol))
}

/// Macro F1 of the tree's majority-leaf predictions on the rows its counts
/// were built from.
pub fn training_f1<F: Scalar>(tree: &Tree<F>) -> F {
    let l = tree.n_classes();
    let (mut tp, mut predicted, mut actual) = (vec![0u64; l], vec![0u64; l], vec![0u64; l]);
    for id in tree.leaf_nodes() {
        let counts = tree.counts(id).expect("leaf");
        let pred = argmax_u64(counts);
        tp[pred] += counts[pred];
        predicted[pred] += counts.iter().sum::<u64>();
        for (a, &c) in actual.iter_mut().zip(counts) {
            *a += c;
        }
    }
    macro_f1_from_counts(&tp, &predicted, &actual)
}

/// Macro F1 of the tree's predictions on `dataset`.
pub fn dataset_f1<F: Scalar>(tree: &Tree<F>, dataset: &Dataset<F>) -> F {
    let l = tree.n_classes();
    let (mut tp, mut predicted, mut actual) = (vec![0u64; l], vec![0u64; l], vec![0u64; l]);
    for (row, &label) in dataset.rows().zip(dataset.labels()) {
        let pred = tree.predict_class(row);
        predicted[pred] += 1;
        actual[label] += 1;
        if pred == label {
            tp[pred] += 1;
        }
    }
    macro_f1_from_counts(&tp, &predicted, &actual)
}

fn monitor_f1<F: Scalar>(tree: &Tree<F>, source: F1Source<'_, F>) -> F {
    match source {
        F1Source::Training => training_f1(tree),
        F1Source::Holdout(d) => dataset_f1(tree, d),
    }
}

fn initial_tree<F: Scalar>(space: &SplitSpace<'_, F>, seed: u64) -> Result<Tree<F>> {
    Tree::init(space.dataset(), space, &mut stream_rng(seed, INIT_STREAM, 0))
}

/// Per-iteration bookkeeping shared by both samplers.
struct Recorder<'a, F> {
    config: &'a ChainConfig,
    source: F1Source<'a, F>,
    started: Instant,
    samples: Vec<Sample<F>>,
    f1: Vec<F>,
    alpha: Vec<F>,
    log_post: Vec<F>,
    yields: Vec<usize>,
    fresh: usize,
    slots: usize,
    collection_start: Option<usize>,
}

impl<'a, F: Scalar> Recorder<'a, F> {
    fn new(config: &'a ChainConfig, source: F1Source<'a, F>) -> Self {
        Self {
            config,
            source,
            started: Instant::now(),
            samples: Vec::new(),
            f1: Vec::with_capacity(config.iterations),
            alpha: Vec::with_capacity(config.iterations),
            log_post: Vec::with_capacity(config.iterations),
            yields: Vec::with_capacity(config.iterations),
            fresh: 0,
            slots: 0,
            collection_start: None,
        }
    }

    fn target_reached(&self) -> bool {
        self.config.target_samples.is_some_and(|t| self.samples.len() >= t)
    }

    fn collect(&mut self, tree: &Arc<Tree<F>>, log_posterior: F, iteration: usize, fresh: bool) {
        if self.target_reached() {
            return;
        }
        self.collection_start.get_or_insert(iteration);
        self.slots += 1;
        self.fresh += usize::from(fresh);
        self.samples.push(Sample {
            tree: Arc::clone(tree),
            log_posterior,
            iteration,
            fresh,
        });
    }

    fn step(&mut self, iteration: usize, current: &Tree<F>, log_posterior: F, alpha: F, fresh: usize) {
        self.f1.push(monitor_f1(current, self.source));
        self.alpha.push(alpha);
        self.log_post.push(log_posterior);
        self.yields.push(fresh);
        if let Some(every) = self.config.progress_every {
            if (iteration + 1).is_multiple_of(every) {
                log::info!(
                    "iter {:>7}  log_post {:>12.4}  f1 {:.4}  accept {:.3}  samples {}",
                    iteration + 1,
                    log_posterior,
                    self.f1[iteration],
                    self.rate(),
                    self.samples.len()
                );
            }
        }
    }

    fn converged_now(&self) -> bool {
        let w = self.config.convergence_window;
        self.f1.len() >= w && window_converged(&self.f1[self.f1.len() - w..], self.config.convergence_tol)
    }

    fn rate(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.fresh as f64 / self.slots as f64
        }
    }

    fn finish(self, convergence: Option<usize>, final_tree: Arc<Tree<F>>) -> ChainResult<F> {
        ChainResult {
            acceptance_rate: self.rate(),
            fresh_acceptances: self.fresh,
            convergence_iteration: convergence,
            collection_start: self.collection_start,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            iterations_run: self.f1.len(),
            workers: self.config.workers,
            samples: self.samples,
            f1_history: self.f1,
            alpha_history: self.alpha,
            log_posterior_history: self.log_post,
            yield_history: self.yields,
            final_tree,
        }
    }
}

/// Classic MH: one proposal per iteration, accepted when `u < alpha`.
/// Every state after the burn-in is a sample, repeats included.
pub fn run_serial<F: Scalar>(dataset: &Dataset<F>, config: &ChainConfig) -> Result<ChainResult<F>> {
    run_serial_with(dataset, config, F1Source::Training)
}

pub fn run_serial_with<F: Scalar>(
    dataset: &Dataset<F>,
    config: &ChainConfig,
    source: F1Source<'_, F>,
) -> Result<ChainResult<F>> {
    config.validate()?;
    let mut rec = Recorder::new(config, source);
    let space = SplitSpace::new(dataset, config.prior.threshold_domain);
    let mut current = Arc::new(initial_tree(&space, config.seed)?);
    let mut current_lp = log_posterior(&current, &space, &config.prior);
    let burn_in = config.burn_in();
    for i in 0..config.iterations {
        let mut rng = stream_rng(config.seed, i as u64, 0);
        let proposal = propose(&current, &space, &config.move_probs, &config.prior, current_lp, &mut rng)?;
        let accepted = accept_uniform(config.seed, i as u64) < proposal.alpha.to_f64_lossy();
        let alpha = proposal.alpha;
        if accepted {
            current = Arc::new(proposal.candidate);
            current_lp = proposal.log_posterior;
        }
        let collecting = i >= burn_in;
        if collecting {
            rec.collect(&current, current_lp, i, accepted);
        }
        rec.step(i, &current, current_lp, alpha, usize::from(collecting && accepted));
        if rec.target_reached() {
            break;
        }
    }
    let convergence = check_convergence(&rec.f1, config.convergence_window, config.convergence_tol);
    Ok(rec.finish(convergence, current))
}

/// The single-chain parallel sampler with `config.workers` workers.
pub fn run_parallel<F: Scalar>(dataset: &Dataset<F>, config: &ChainConfig) -> Result<ChainResult<F>> {
    run_parallel_with(dataset, config, F1Source::Training)
}

pub fn run_parallel_with<F: Scalar>(
    dataset: &Dataset<F>,
    config: &ChainConfig,
    source: F1Source<'_, F>,
) -> Result<ChainResult<F>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    let mut rec = Recorder::new(config, source);
    let space = SplitSpace::new(dataset, config.prior.threshold_domain);
    let mut current = Arc::new(initial_tree(&space, config.seed)?);
    let mut current_lp = log_posterior(&current, &space, &config.prior);
    let mut convergence = None;
    for i in 0..config.iterations {
        let candidates = pool.install(|| {
            (0..config.workers)
                .into_par_iter()
                .map(|j| {
                    let mut rng = stream_rng(config.seed, i as u64, j as u64);
                    propose(&current, &space, &config.move_probs, &config.prior, current_lp, &mut rng)
                        .map(|p| (Arc::new(p.candidate), p.log_posterior, p.alpha))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let best = (1..candidates.len()).fold(0, |b, j| if candidates[j].2 > candidates[b].2 { j } else { b });
        let max_alpha = candidates[best].2;
        let mut fresh = 0;
        if convergence.is_none() {
            current = Arc::clone(&candidates[best].0);
            current_lp = candidates[best].1;
        } else {
            let u = accept_uniform(config.seed, i as u64);
            for (tree, lp, alpha) in &candidates {
                let take = alpha.to_f64_lossy() > u;
                if take && !rec.target_reached() {
                    fresh += 1;
                }
                if take {
                    rec.collect(tree, *lp, i, true);
                } else {
                    rec.collect(&current, current_lp, i, false);
                }
            }
            if max_alpha.to_f64_lossy() > u {
                current = Arc::clone(&candidates[best].0);
                current_lp = candidates[best].1;
            }
        }
        rec.step(i, &current, current_lp, max_alpha, fresh);
        if convergence.is_none() && rec.converged_now() {
            convergence = Some(i);
        }
        if rec.target_reached() {
            break;
        }
    }
    Ok(rec.finish(convergence, current))
}
