//! Eight points, two binary features, trees of depth at most two: small
//! enough to enumerate every tree and score it by direct products.

#![allow(dead_code)]

use dtree_mcmc::tree::ROOT;
use dtree_mcmc::{Dataset64, NodeKind, PriorConfig, Tree64};

pub const ROWS: [([f64; 2], usize); 8] = [
    ([0.0, 0.0], 0),
    ([0.0, 0.0], 0),
    ([0.0, 1.0], 1),
    ([0.0, 1.0], 0),
    ([1.0, 0.0], 1),
    ([1.0, 0.0], 1),
    ([1.0, 1.0], 0),
    ([1.0, 1.0], 1),
];

pub fn dataset() -> Dataset64 {
    Dataset64::new(
        ROWS.iter().map(|(x, _)| x.to_vec()).collect(),
        ROWS.iter().map(|&(_, y)| y).collect(),
        vec!["x0".into(), "x1".into()],
    )
    .unwrap()
}

pub fn prior() -> PriorConfig {
    PriorConfig {
        max_depth: Some(2),
        ..PriorConfig::default()
    }
}

pub const RULES: [(usize, f64); 4] = [(0, 0.0), (0, 1.0), (1, 0.0), (1, 1.0)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Child {
    Leaf,
    Split(usize, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MicroTree {
    Leaf,
    Split { rule: (usize, f64), left: Child, right: Child },
}

/// The lone leaf followed by all 100 trees with a root split.
pub fn enumerate() -> Vec<MicroTree> {
    let children: Vec<Child> = std::iter::once(Child::Leaf)
        .chain(RULES.iter().map(|&(f, t)| Child::Split(f, t)))
        .collect();
    let mut out = vec![MicroTree::Leaf];
    for &rule in &RULES {
        for &left in &children {
            for &right in &children {
                out.push(MicroTree::Split { rule, left, right });
            }
        }
    }
    out
}

pub fn build(ds: &Dataset64, t: &MicroTree) -> Tree64 {
    let leaf = Tree64::single_leaf(ds);
    let MicroTree::Split { rule, left, right } = *t else {
        return leaf;
    };
    let mut tree = leaf.grow(ds, ROOT, rule.0, rule.1).unwrap();
    if let Child::Split(f, c) = left {
        let (l, _) = tree.children(ROOT).unwrap();
        tree = tree.grow(ds, l, f, c).unwrap();
    }
    if let Child::Split(f, c) = right {
        let (_, r) = tree.children(ROOT).unwrap();
        tree = tree.grow(ds, r, f, c).unwrap();
    }
    tree
}

/// Preorder signature of a library tree.
pub fn key(tree: &Tree64) -> String {
    tree.nodes()
        .iter()
        .map(|n| match n.kind {
            NodeKind::Decision { feature, threshold, .. } => format!("({feature},{threshold})"),
            NodeKind::Leaf { .. } => "L".to_string(),
        })
        .collect()
}

pub fn micro_key(t: &MicroTree) -> String {
    let child = |c: Child| match c {
        Child::Leaf => "L".to_string(),
        Child::Split(f, v) => format!("({f},{v})LL"),
    };
    match *t {
        MicroTree::Leaf => "L".into(),
        MicroTree::Split { rule, left, right } => format!("({},{}){}{}", rule.0, rule.1, child(left), child(right)),
    }
}

/// Unnormalised posterior as a plain product: likelihood of every point
/// under smoothed leaf frequencies, times `1/p * 1/c` per split, times the
/// node-wise depth prior.
pub fn oracle(t: &MicroTree, prior: &PriorConfig) -> f64 {
    const P: f64 = 2.0;
    const C: f64 = 2.0;
    const L: usize = 2;
    let (a, b, eps) = (prior.alpha, prior.beta, prior.smoothing_eps);
    let split = |depth: f64| a * (1.0 + depth).powf(-b);

    // leaf index for each point: 0 for the lone leaf, else 2*side + sub
    let leaf_of = |x: &[f64; 2]| -> usize {
        match *t {
            MicroTree::Leaf => 0,
            MicroTree::Split { rule, left, right } => {
                let go_left = x[rule.0] <= rule.1;
                let (side, child) = if go_left { (0, left) } else { (1, right) };
                match child {
                    Child::Leaf => 2 * side,
                    Child::Split(f, v) => 2 * side + usize::from(x[f] > v),
                }
            }
        }
    };
    let mut counts = [[0usize; L]; 4];
    for (x, y) in &ROWS {
        counts[leaf_of(x)][*y] += 1;
    }
    let mut likelihood = 1.0;
    for (x, y) in &ROWS {
        let c = counts[leaf_of(x)];
        let n = (c[0] + c[1]) as f64;
        likelihood *= (c[*y] as f64 + eps) / (n + L as f64 * eps);
    }

    let (params, structure) = match *t {
        MicroTree::Leaf => (1.0, 1.0 - split(0.0)),
        MicroTree::Split { left, right, .. } => {
            let mut params = 1.0 / (P * C);
            let mut structure = split(0.0);
            for child in [left, right] {
                match child {
                    Child::Leaf => structure *= 1.0 - split(1.0),
                    Child::Split(..) => {
                        params *= 1.0 / (P * C);
                        structure *= split(1.0) * (1.0 - split(2.0)) * (1.0 - split(2.0));
                    }
                }
            }
            (params, structure)
        }
    };
    likelihood * params * structure
}

/// Oracle posterior over the trees with a root split, normalised, keyed by
/// signature.
pub fn exact_distribution(prior: &PriorConfig) -> Vec<(String, f64)> {
    let trees: Vec<MicroTree> = enumerate().into_iter().filter(|t| *t != MicroTree::Leaf).collect();
    let mass: Vec<f64> = trees.iter().map(|t| oracle(t, prior)).collect();
    let z: f64 = mass.iter().sum();
    trees.iter().zip(mass).map(|(t, m)| (micro_key(t), m / z)).collect()
}
