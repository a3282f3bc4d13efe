mod common;

use common::micro;
use dtree_mcmc::posterior::log_posterior;
use dtree_mcmc::{PriorMode, SplitSpace, ThresholdDomain};

#[test]
fn every_micro_tree_matches_the_product_oracle() {
    let ds = micro::dataset();
    let space = SplitSpace::new(&ds, ThresholdDomain::PerFeature);
    let trees = micro::enumerate();
    assert_eq!(trees.len(), 101);
    for prior in [
        micro::prior(),
        dtree_mcmc::PriorConfig { alpha: 0.5, beta: 2.0, smoothing_eps: 0.5, ..micro::prior() },
    ] {
        for t in &trees {
            let tree = micro::build(&ds, t);
            assert_eq!(micro::key(&tree), micro::micro_key(t));
            let ours = log_posterior(&tree, &space, &prior).exp();
            let oracle = micro::oracle(t, &prior);
            let rel = ((ours - oracle) / oracle).abs();
            assert!(rel < 1e-9, "{t:?}: {ours} vs {oracle}");
        }
    }
}

#[test]
fn enumeration_has_no_duplicates() {
    let ds = micro::dataset();
    let mut keys: Vec<String> = micro::enumerate().iter().map(|t| micro::key(&micro::build(&ds, t))).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 101);
}

#[test]
fn whole_tree_prior_differs_only_in_structure_term() {
    let ds = micro::dataset();
    let space = SplitSpace::new(&ds, ThresholdDomain::PerFeature);
    let node = micro::prior();
    let whole = dtree_mcmc::PriorConfig { mode: PriorMode::WholeTree, ..node.clone() };
    for t in micro::enumerate() {
        let tree = micro::build(&ds, &t);
        let a = dtree_mcmc::posterior::log_posterior_terms(&tree, &space, &node);
        let b = dtree_mcmc::posterior::log_posterior_terms(&tree, &space, &whole);
        assert_eq!(a.log_likelihood, b.log_likelihood);
        assert_eq!(a.log_param_prior, b.log_param_prior);
        let expected = node.alpha.ln() - node.beta * (1.0 + tree.depth() as f64).ln();
        assert!((b.log_tree_prior - expected).abs() < 1e-12);
    }
}
