use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use dtree_mcmc::eval::{classification_metrics, speedup_model, welch_t_test, Ensemble};
use dtree_mcmc::moves::log_proposal_prob;
use dtree_mcmc::posterior::{acceptance_ratio, log_likelihood, log_param_prior, log_posterior, log_tree_prior};
use dtree_mcmc::rng::stream_rng;
use dtree_mcmc::sampler::training_f1;
use dtree_mcmc::{
    kfold_split, propose, stratified_kfold_split, Dataset64, MoveKind, MoveProbabilities, PriorConfig, SplitSpace,
    ThresholdDomain, Tree64,
};

/// Rows of small integer features with every class present.
fn dataset_strategy() -> impl Strategy<Value = Dataset64> {
    (2usize..4, 1usize..4, 6usize..40).prop_flat_map(|(classes, features, n)| {
        (
            proptest::collection::vec(proptest::collection::vec(0u8..6, features), n),
            proptest::collection::vec(0..classes, n),
        )
            .prop_map(move |(rows, mut labels)| {
                for (c, label) in labels.iter_mut().take(classes).enumerate() {
                    *label = c;
                }
                let rows = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
                let names = (0..features).map(|f| format!("x{f}")).collect();
                Dataset64::new(rows, labels, names).unwrap()
            })
    })
}

fn splittable(ds: &Dataset64) -> bool {
    (0..ds.n_features()).any(|f| ds.unique_values(f).len() >= 2)
}

/// A tree reached by `steps` always-accepted proposals from a random start.
fn random_tree(ds: &Dataset64, space: &SplitSpace<'_, f64>, prior: &PriorConfig, seed: u64, steps: u64) -> Tree64 {
    let probs = MoveProbabilities::default();
    let mut tree = Tree64::init(ds, space, &mut stream_rng(seed, u64::MAX, 0)).unwrap();
    for i in 0..steps {
        let lp = log_posterior(&tree, space, prior);
        tree = propose(&tree, space, &probs, prior, lp, &mut stream_rng(seed, i, 0)).unwrap().candidate;
    }
    tree
}

fn shuffled(ds: &Dataset64, seed: u64) -> Dataset64 {
    let mut idx: Vec<usize> = (0..ds.n_rows()).collect();
    idx.shuffle(&mut stream_rng(seed, 0, 1));
    ds.select(&idx)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn tree_counts_are_consistent(ds in dataset_strategy(), seed in any::<u64>(), steps in 0u64..30) {
        prop_assume!(splittable(&ds));
        let space = SplitSpace::new(&ds, ThresholdDomain::PerFeature);
        let tree = random_tree(&ds, &space, &PriorConfig::default(), seed, steps);
        prop_assert!(tree.validate().is_ok());
        prop_assert_eq!(tree.n_leaves(), tree.n_decisions() + 1);
        let leaf_total: u64 = tree.leaf_nodes().iter().map(|&l| tree.counts(l).unwrap().iter().sum::<u64>()).sum();
        prop_assert_eq!(leaf_total, ds.n_rows() as u64);

        let mut routed = vec![vec![0u64; ds.n_classes()]; tree.len()];
        for (x, &y) in ds.rows().zip(ds.labels()) {
            let leaf = tree.route(x);
            prop_assert!(tree.node(leaf).unwrap().is_leaf());
            routed[leaf][y] += 1;
        }
        for leaf in tree.leaf_nodes() {
            prop_assert_eq!(tree.counts(leaf).unwrap(), routed[leaf].as_slice());
        }
    }

    #[test]
    fn proposals_leave_input_untouched_and_store_exact_q(
        ds in dataset_strategy(),
        seed in any::<u64>(),
        steps in 0u64..20,
        draw in any::<u64>(),
    ) {
        prop_assume!(splittable(&ds));
        let space = SplitSpace::new(&ds, ThresholdDomain::PerFeature);
        let prior = PriorConfig::default();
        let probs = MoveProbabilities::default();
        let tree = random_tree(&ds, &space, &prior, seed, steps);
        let before = tree.clone();
        let lp = log_posterior(&tree, &space, &prior);
        let prop = propose(&tree, &space, &probs, &prior, lp, &mut stream_rng(draw, 0, 0)).unwrap();
        prop_assert_eq!(&tree, &before);

        prop_assert!(prop.alpha > 0.0 && prop.alpha <= 1.0);
        let alpha = acceptance_ratio(lp, prop.log_posterior, prop.log_q_fwd, prop.log_q_rev);
        prop_assert_eq!(alpha, prop.alpha);
        prop_assert_eq!(prop.log_posterior, log_posterior(&prop.candidate, &space, &prior));

        if matches!(prop.kind, MoveKind::Change | MoveKind::Swap) {
            prop_assert_eq!(prop.log_q_fwd, prop.log_q_rev);
        }
        // a change to the same rule or a swap of equal rules is a no-op with
        // no unique structural diff
        if prop.candidate != tree {
            let fwd = log_proposal_prob(&tree, &prop.candidate, prop.kind, &probs, &space, prior.max_depth).unwrap();
            let rev = log_proposal_prob(&prop.candidate, &tree, prop.kind.reverse(), &probs, &space, prior.max_depth)
                .unwrap();
            prop_assert!((fwd - prop.log_q_fwd).abs() <= 1e-12 * fwd.abs().max(1.0));
            prop_assert!((rev - prop.log_q_rev).abs() <= 1e-12 * rev.abs().max(1.0));
        }
    }

    #[test]
    fn duplicated_rows_double_the_unsmoothed_likelihood(
        ds in dataset_strategy(),
        seed in any::<u64>(),
        steps in 0u64..20,
    ) {
        prop_assume!(splittable(&ds));
        let prior = PriorConfig::default();
        let space = SplitSpace::new(&ds, ThresholdDomain::PerFeature);
        let tree = random_tree(&ds, &space, &prior, seed, steps);

        let idx: Vec<usize> = (0..ds.n_rows()).chain(0..ds.n_rows()).collect();
        let doubled = ds.select(&idx);
        let doubled_space = SplitSpace::new(&doubled, ThresholdDomain::PerFeature);
        let twin = tree.clone().refreshed(&doubled);

        prop_assert_eq!(log_likelihood(&twin, 0.0), 2.0 * log_likelihood(&tree, 0.0));
        prop_assert_eq!(log_param_prior(&twin, &doubled_space), log_param_prior(&tree, &space));
        prop_assert_eq!(log_tree_prior(&twin, &prior), log_tree_prior(&tree, &prior));
    }

    #[test]
    fn folds_partition_rows_deterministically(ds in dataset_strategy(), k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(k <= ds.n_rows());
        for folds in [kfold_split(&ds, k, seed).unwrap(), stratified_kfold_split(&ds, k, seed).unwrap()] {
            prop_assert_eq!(folds.len(), k);
            let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.iter().copied()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..ds.n_rows()).collect::<Vec<_>>());
            for f in &folds {
                prop_assert_eq!(f.train.len() + f.test.len(), ds.n_rows());
                prop_assert!(f.train.iter().all(|i| !f.test.contains(i)));
            }
        }
        prop_assert_eq!(kfold_split(&ds, k, seed).unwrap(), kfold_split(&ds, k, seed).unwrap());
        prop_assert_eq!(
            stratified_kfold_split(&ds, k, seed).unwrap(),
            stratified_kfold_split(&ds, k, seed).unwrap()
        );
    }

    #[test]
    fn unique_counts_never_exceed_rows(ds in dataset_strategy()) {
        for f in 0..ds.n_features() {
            prop_assert!(ds.unique_count(f).unwrap_or(0) <= ds.n_rows());
        }
    }

    #[test]
    fn welch_statistic_flips_sign_with_argument_order(
        a in proptest::collection::vec(-10.0f64..10.0, 3..30),
        b in proptest::collection::vec(-10.0f64..10.0, 3..30),
    ) {
        let ab = welch_t_test(&a, &b, 0.05);
        let ba = welch_t_test(&b, &a, 0.05);
        prop_assume!(ab.is_ok());
        let (ab, ba) = (ab.unwrap(), ba.unwrap());
        prop_assert!((ab.t_statistic + ba.t_statistic).abs() <= 1e-12 * ab.t_statistic.abs().max(1.0));
        prop_assert!((ab.nu - ba.nu).abs() <= 1e-9 * ab.nu);
        prop_assert_eq!(ab.reject_null, ba.reject_null);
    }

    #[test]
    fn micro_averaged_recall_is_accuracy(
        pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60),
    ) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let report = classification_metrics(&pred, &truth, 4).unwrap();
        let hits: f64 = report.per_label.iter().map(|m| m.recall * m.support as f64).sum();
        prop_assert!((hits / report.total as f64 - report.accuracy).abs() < 1e-12);
    }

    #[test]
    fn speedup_iterations_recover_sample_target(
        samples in 1u64..1_000_000,
        cores in 1u64..64,
        pr in 0.001f64..1.0,
        t in 1.0f64..1e6,
    ) {
        let est = speedup_model(samples, cores, pr, t).unwrap();
        let back = est.iterations_needed * cores as f64 * pr;
        prop_assert!((back - samples as f64).abs() <= 1e-9 * samples as f64);
    }

    #[test]
    fn ensemble_prediction_ignores_sample_order(
        ds in dataset_strategy(),
        seed in any::<u64>(),
        shuffle in any::<u64>(),
    ) {
        prop_assume!(splittable(&ds));
        let prior = PriorConfig::default();
        let space = SplitSpace::new(&ds, ThresholdDomain::PerFeature);
        let trees: Vec<Arc<Tree64>> = (0..6).map(|s| Arc::new(random_tree(&ds, &space, &prior, seed ^ s, 5 + s))).collect();
        let mut permuted = trees.clone();
        permuted.shuffle(&mut stream_rng(shuffle, 0, 0));
        let a = Ensemble::new(&trees, 1.0).unwrap();
        let b = Ensemble::new(&permuted, 1.0).unwrap();
        for x in ds.rows() {
            let (la, pa) = a.predict(x);
            let (lb, pb) = b.predict(x);
            prop_assert!(pa.iter().zip(&pb).all(|(p, q)| (p - q).abs() < 1e-12));
            // labels may only differ on an exact tie, which is vanishingly rare
            if la != lb {
                prop_assert!((pa[la] - pa[lb]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn training_f1_ignores_row_order(ds in dataset_strategy(), seed in any::<u64>(), shuffle in any::<u64>()) {
        prop_assume!(splittable(&ds));
        let space = SplitSpace::new(&ds, ThresholdDomain::PerFeature);
        let tree = random_tree(&ds, &space, &PriorConfig::default(), seed, 10);
        let other = tree.clone().refreshed(&shuffled(&ds, shuffle));
        prop_assert_eq!(training_f1(&tree), training_f1(&other));
    }
}
