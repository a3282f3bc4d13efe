//! Unnormalised log posterior of a tree and the MH acceptance ratio.
//!
//! `log p(T | data) = log-likelihood + log p(split rules | T) + log p(T)`,
//! all evaluated in log space.

use serde::{Deserialize, Serialize};

use crate::data::{SplitSpace, ThresholdDomain};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::{NodeKind, Tree};

/// How the structure prior is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Every node at depth `d` splits with probability `alpha / (1 + d)^beta`;
    /// the prior is the product over decision nodes (split) and leaves (no split).
    #[default]
    NodeWise,
    /// A single factor `alpha / (1 + depth(T))^beta` for the whole tree.
    WholeTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub alpha: f64,
    pub beta: f64,
    pub smoothing_eps: f64,
    pub mode: PriorMode,
    pub threshold_domain: ThresholdDomain,
    /// Trees deeper than this are outside the support; grow moves that would
    /// exceed it are never proposed.
    pub max_depth: Option<usize>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            beta: 1.0,
            smoothing_eps: 1.0,
            mode: PriorMode::NodeWise,
            threshold_domain: ThresholdDomain::PerFeature,
            max_depth: None,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.smoothing_eps > 0.0 && self.smoothing_eps.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing_eps must be > 0, got {}",
                self.smoothing_eps
            )));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// The three additive pieces of the log posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPosterior<F> {
    pub log_likelihood: F,
    pub log_param_prior: F,
    pub log_tree_prior: F,
}

impl<F: Scalar> LogPosterior<F> {
    pub fn total(&self) -> F {
        self.log_likelihood + self.log_param_prior + self.log_tree_prior
    }
}

/// `sum_i log p(y_i | leaf(x_i))` with leaf class probabilities
/// `(count[y] + eps) / (n_leaf + L * eps)`. Reads the leaf counts, so they
/// must be fresh. `eps = 0` gives the empirical (unsmoothed) likelihood.
pub fn log_likelihood<F: Scalar>(tree: &Tree<F>, eps: F) -> F {
    let n_classes = F::of_usize(tree.n_classes());
    let mut total = F::zero();
    for node in tree.nodes() {
        if let NodeKind::Leaf { counts } = &node.kind {
            let n: u64 = counts.iter().sum();
            let denom = F::of_usize(n as usize) + n_classes * eps;
            for &c in counts.iter().filter(|&&c| c > 0) {
                let c = F::of_usize(c as usize);
                total = total + c * ((c + eps) / denom).ln();
            }
        }
    }
    total
}

/// `sum_j [log(1/p) + log(1/c_j)]` over decision nodes, where `c_j` is the
/// threshold count of node j's feature in the split space.
pub fn log_param_prior<F: Scalar>(tree: &Tree<F>, space: &SplitSpace<'_, F>) -> F {
    let log_p = F::of_usize(space.n_features()).ln();
    tree.nodes()
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::Decision { feature, .. } => {
                Some(-(log_p + F::of_usize(space.threshold_count(feature)).ln()))
            }
            NodeKind::Leaf { .. } => None,
        })
        .fold(F::zero(), |acc, x| acc + x)
}

/// Log of the depth-penalising structure prior.
pub fn log_tree_prior<F: Scalar>(tree: &Tree<F>, prior: &PriorConfig) -> F {
    let alpha = F::of(prior.alpha);
    let beta = F::of(prior.beta);
    let log_split = |depth: usize| alpha.ln() - beta * F::of_usize(depth + 1).ln();
    match prior.mode {
        PriorMode::WholeTree => log_split(tree.depth()),
        PriorMode::NodeWise => tree
            .nodes()
            .iter()
            .map(|n| {
                let ls = log_split(n.depth);
                if n.is_leaf() {
                    (-ls.exp()).ln_1p()
                } else {
                    ls
                }
            })
            .fold(F::zero(), |acc, x| acc + x),
    }
}

pub fn log_posterior_terms<F: Scalar>(
    tree: &Tree<F>,
    space: &SplitSpace<'_, F>,
    prior: &PriorConfig,
) -> LogPosterior<F> {
    LogPosterior {
        log_likelihood: log_likelihood(tree, F::of(prior.smoothing_eps)),
        log_param_prior: log_param_prior(tree, space),
        log_tree_prior: log_tree_prior(tree, prior),
    }
}

pub fn log_posterior<F: Scalar>(tree: &Tree<F>, space: &SplitSpace<'_, F>, prior: &PriorConfig) -> F {
    log_posterior_terms(tree, space, prior).total()
}

/// `min(1, exp((log_post' - log_post) + (log_q_rev - log_q_fwd)))`, with a
/// single exponentiation at the end.
pub fn acceptance_ratio<F: Scalar>(current_log_post: F, candidate_log_post: F, log_q_fwd: F, log_q_rev: F) -> F {
    let log_ratio = (candidate_log_post - current_log_post) + (log_q_rev - log_q_fwd);
    if log_ratio >= F::zero() {
        F::one()
    } else if log_ratio.is_nan() {
        F::zero()
    } else {
        log_ratio.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::tree::ROOT;
    use approx::assert_abs_diff_eq;

    fn balanced() -> Dataset<f64> {
        Dataset::new(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![0, 0, 1, 1],
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn unsmoothed_single_leaf_likelihood() {
        let t = Tree::single_leaf(&balanced());
        assert_abs_diff_eq!(log_likelihood(&t, 0.0), 4.0 * 0.5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_likelihood(&t, 0.0), -2.7726, epsilon = 1e-4);
    }

    #[test]
    fn pure_leaf_likelihood_vanishes_as_eps_shrinks() {
        let d = Dataset::new(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0, 0, 1], vec!["x".into()]).unwrap();
        let t = Tree::single_leaf(&d).grow(&d, ROOT, 0, 2.0).unwrap();
        assert_eq!(log_likelihood(&t, 0.0), 0.0);
        assert!(log_likelihood(&t, 1e-9) > -1e-8);
        assert!(log_likelihood(&t, 1.0) < 0.0);
    }

    #[test]
    fn merging_pure_with_impure_lowers_likelihood() {
        let d = Dataset::new(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]],
            vec![0, 0, 1, 1, 0],
            vec!["x".into()],
        )
        .unwrap();
        let split = Tree::single_leaf(&d).grow(&d, ROOT, 0, 2.0).unwrap();
        let merged = Tree::single_leaf(&d);
        for eps in [0.0, 0.5, 1.0] {
            assert!(log_likelihood(&merged, eps) < log_likelihood(&split, eps));
            assert!(log_likelihood(&split, eps) <= 0.0);
        }
    }

    #[test]
    fn param_prior_values() {
        let rows = (0..100).map(|i| vec![i as f64, 0.0, 0.0, 0.0, 0.0]).collect();
        let labels = (0..100).map(|i| i % 2).collect();
        let names = (0..5).map(|i| format!("f{i}")).collect();
        let d = Dataset::new(rows, labels, names).unwrap();
        let space = SplitSpace::new(&d, ThresholdDomain::PerFeature);
        assert_eq!(log_param_prior(&Tree::single_leaf(&d), &space), 0.0);
        let t = Tree::single_leaf(&d).grow(&d, ROOT, 0, 10.0).unwrap();
        assert_abs_diff_eq!(log_param_prior(&t, &space), -6.2146, epsilon = 1e-4);
        assert_abs_diff_eq!(
            log_param_prior(&t, &space),
            (1.0f64 / 5.0).ln() + (1.0f64 / 100.0).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn tree_prior_values() {
        let d = balanced();
        let leaf = Tree::single_leaf(&d);
        let node_wise = PriorConfig::default();
        assert_abs_diff_eq!(log_tree_prior(&leaf, &node_wise), -2.9957, epsilon = 1e-4);
        let whole = PriorConfig {
            alpha: 0.5,
            beta: 2.0,
            mode: PriorMode::WholeTree,
            ..PriorConfig::default()
        };
        assert_abs_diff_eq!(log_tree_prior(&leaf, &whole), 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn deep_splits_cost_more_than_shallow_ones() {
        let d = balanced();
        let prior = PriorConfig::default();
        let root = Tree::single_leaf(&d).grow(&d, ROOT, 0, 2.0).unwrap();
        let (l, _) = root.children(ROOT).unwrap();
        let depth2 = root.grow(&d, l, 0, 1.0).unwrap();
        let (ll, _) = depth2.children(l).unwrap();
        let depth3 = depth2.grow(&d, ll, 0, 1.0).unwrap();
        let shallow_gain = log_tree_prior(&depth2, &prior) - log_tree_prior(&root, &prior);
        let deep_gain = log_tree_prior(&depth3, &prior) - log_tree_prior(&depth2, &prior);
        assert!(deep_gain < shallow_gain);
    }

    #[test]
    fn posterior_is_sum_of_terms() {
        let d = balanced();
        let space = SplitSpace::new(&d, ThresholdDomain::PerFeature);
        let prior = PriorConfig::default();
        let t = Tree::single_leaf(&d).grow(&d, ROOT, 0, 3.0).unwrap();
        let terms = log_posterior_terms(&t, &space, &prior);
        let sum = log_likelihood(&t, 1.0) + log_param_prior(&t, &space) + log_tree_prior(&t, &prior);
        assert_abs_diff_eq!(log_posterior(&t, &space, &prior), sum, epsilon = 1e-12);
        assert_eq!(terms.total(), log_posterior(&t, &space, &prior));
    }

    #[test]
    fn worked_single_leaf_posterior() {
        let d = balanced();
        let space = SplitSpace::new(&d, ThresholdDomain::PerFeature);
        let leaf = Tree::single_leaf(&d);
        let total = log_likelihood(&leaf, 0.0) + log_param_prior(&leaf, &space)
            + log_tree_prior(&leaf, &PriorConfig::default());
        assert_abs_diff_eq!(total, -5.7683, epsilon = 1e-4);
    }

    #[test]
    fn better_split_raises_posterior() {
        let d = balanced();
        let space = SplitSpace::new(&d, ThresholdDomain::PerFeature);
        let prior = PriorConfig::default();
        let sloppy = Tree::single_leaf(&d).grow(&d, ROOT, 0, 1.0).unwrap();
        let clean = sloppy.change(&d, ROOT, 0, 2.0).unwrap();
        assert!(log_posterior(&clean, &space, &prior) > log_posterior(&sloppy, &space, &prior));
    }

    #[test]
    fn acceptance_ratio_cases() {
        assert_eq!(acceptance_ratio(-3.0, -3.0, -2.0, -2.0), 1.0);
        assert_eq!(acceptance_ratio(-3.0, -1.0, -2.0, -5.0), (-1.0f64).exp());
        let a = acceptance_ratio(-1.0, -400.0, -1.0, -1.0);
        assert!(a > 0.0 && a < 1e-150);
    }

    #[test]
    fn config_validation() {
        assert!(PriorConfig::default().validate().is_ok());
        for bad in [
            PriorConfig { alpha: 1.0, ..Default::default() },
            PriorConfig { alpha: 0.0, ..Default::default() },
            PriorConfig { beta: -1.0, ..Default::default() },
            PriorConfig { smoothing_eps: 0.0, ..Default::default() },
            PriorConfig { max_depth: Some(0), ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn works_in_single_precision() {
        let d: Dataset<f32> = Dataset::new(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![0, 0, 1, 1],
            vec!["x".into()],
        )
        .unwrap();
        let t = Tree::single_leaf(&d);
        assert!((log_likelihood(&t, 0.0f32) - (-2.7725887f32)).abs() < 1e-5);
    }
}
