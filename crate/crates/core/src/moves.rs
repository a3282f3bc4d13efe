//! Grow / prune / change / swap proposals and their exact log proposal
//! probabilities.
//!
//! Move kinds are drawn from user-set interval probabilities. A kind that is
//! infeasible on the current tree is redrawn, so the effective probability
//! of a kind is renormalised over the kinds feasible on that tree; the
//! proposal probabilities below use the same renormalisation so that the
//! chain stays exact.
//!
//! | move   | q(T -> T')                                   |
//! |--------|----------------------------------------------|
//! | grow   | p(G) / \|growable leaves\| / p / c_k         |
//! | prune  | p(P) / \|prunable nodes\|                    |
//! | change | p(C) / \|D\| / (number of (k, c) pairs)      |
//! | swap   | p(S) / (\|D\| (\|D\| - 1) / 2)               |
//!
//! With `p` features of `c` values each, the change row is the familiar
//! `p(C) / |D| / p / c`; counting pairs keeps change symmetric when
//! features have different numbers of distinct values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SplitSpace;
use crate::error::{Error, Result};
use crate::posterior::{acceptance_ratio, log_posterior, PriorConfig};
use crate::scalar::Scalar;
use crate::tree::{NodeId, NodeKind, Tree, ROOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
    Swap,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [MoveKind::Grow, MoveKind::Prune, MoveKind::Change, MoveKind::Swap];

    /// The move that undoes this one.
    pub fn reverse(self) -> Self {
        match self {
            MoveKind::Grow => MoveKind::Prune,
            MoveKind::Prune => MoveKind::Grow,
            MoveKind::Change => MoveKind::Change,
            MoveKind::Swap => MoveKind::Swap,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

pub fn reverse_move(kind: MoveKind) -> MoveKind {
    kind.reverse()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbabilities {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
    pub swap: f64,
}

impl Default for MoveProbabilities {
    fn default() -> Self {
        Self {
            grow: 0.3,
            prune: 0.3,
            change: 0.2,
            swap: 0.2,
        }
    }
}

impl MoveProbabilities {
    pub fn validate(&self) -> Result<()> {
        let all = self.as_array();
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config(format!("move probabilities must lie in [0, 1]: {all:?}")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("move probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.grow, self.prune, self.change, self.swap]
    }

    pub fn get(&self, kind: MoveKind) -> f64 {
        self.as_array()[kind.index()]
    }

    /// Interval boundaries `[0, G, G+P, G+P+C, 1]`.
    pub fn cumulative(&self) -> [f64; 5] {
        let g = self.grow;
        let gp = g + self.prune;
        let gpc = gp + self.change;
        [0.0, g, gp, gpc, 1.0]
    }

    /// The kind whose interval contains `u`.
    pub fn kind_at(&self, u: f64) -> MoveKind {
        let cum = self.cumulative();
        MoveKind::ALL
            .into_iter()
            .zip(&cum[1..4])
            .find(|&(_, &upper)| u < upper)
            .map_or(MoveKind::Swap, |(kind, _)| kind)
    }
}

/// Which move kinds can be applied to `tree`.
pub fn feasible_moves<F: Scalar>(tree: &Tree<F>, max_depth: Option<usize>) -> [bool; 4] {
    let decisions = tree.n_decisions();
    [
        !tree.growable_leaves(max_depth).is_empty(),
        !tree.prunable_nodes().is_empty(),
        decisions >= 1,
        decisions >= 2,
    ]
}

/// `log` of the renormalised probability of picking `kind` on a tree with
/// the given feasibility, or `None` if it cannot be picked.
fn log_kind_prob<F: Scalar>(kind: MoveKind, probs: &MoveProbabilities, feasible: [bool; 4]) -> Option<F> {
    let p = probs.get(kind);
    if !feasible[kind.index()] || p <= 0.0 {
        return None;
    }
    let mass: f64 = MoveKind::ALL
        .iter()
        .filter(|k| feasible[k.index()])
        .map(|&k| probs.get(k))
        .sum();
    Some(F::of(p).ln() - F::of(mass).ln())
}

/// Draws `u ~ U[0, 1)`, maps it through the move intervals and redraws
/// until the kind is feasible on `tree`.
pub fn sample_move<R: Rng + ?Sized, F: Scalar>(
    rng: &mut R,
    probs: &MoveProbabilities,
    tree: &Tree<F>,
    max_depth: Option<usize>,
) -> Result<MoveKind> {
    let feasible = feasible_moves(tree, max_depth);
    if !MoveKind::ALL.iter().any(|&k| feasible[k.index()] && probs.get(k) > 0.0) {
        return Err(Error::NoFeasibleMove);
    }
    loop {
        let kind = probs.kind_at(rng.random::<f64>());
        if feasible[kind.index()] && probs.get(kind) > 0.0 {
            return Ok(kind);
        }
    }
}

/// The concrete edit a proposal applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveDetail<F> {
    Grow { leaf: NodeId, feature: usize, threshold: F },
    Prune { node: NodeId },
    Change { node: NodeId, feature: usize, threshold: F },
    Swap { a: NodeId, b: NodeId },
}

/// A candidate tree with everything the acceptance step needs.
#[derive(Debug, Clone)]
pub struct Proposal<F> {
    pub kind: MoveKind,
    pub detail: MoveDetail<F>,
    pub candidate: Tree<F>,
    pub log_q_fwd: F,
    pub log_q_rev: F,
    pub log_posterior: F,
    pub alpha: F,
}

/// Draws a feasible move, applies it to `tree` and scores the candidate.
///
/// `current_log_post` is the log posterior of `tree`; it is passed in
/// because the chain already holds it.
pub fn propose<R: Rng + ?Sized, F: Scalar>(
    tree: &Tree<F>,
    space: &SplitSpace<'_, F>,
    probs: &MoveProbabilities,
    prior: &PriorConfig,
    current_log_post: F,
    rng: &mut R,
) -> Result<Proposal<F>> {
    if tree.is_single_leaf() {
        return Err(Error::InvalidTree(
            "chain states need a root split; a lone root leaf cannot be reached back by prune".into(),
        ));
    }
    let dataset = space.dataset();
    let kind = sample_move(rng, probs, tree, prior.max_depth)?;
    let pick = |rng: &mut R, ids: &[NodeId]| ids[rng.random_range(0..ids.len())];
    let (detail, candidate) = match kind {
        MoveKind::Grow => {
            let leaf = pick(rng, &tree.growable_leaves(prior.max_depth));
            let feature = rng.random_range(0..space.n_features());
            let thresholds = space.thresholds(feature);
            let threshold = thresholds[rng.random_range(0..thresholds.len())];
            (
                MoveDetail::Grow { leaf, feature, threshold },
                tree.grow(dataset, leaf, feature, threshold)?,
            )
        }
        MoveKind::Prune => {
            let node = pick(rng, &tree.prunable_nodes());
            (MoveDetail::Prune { node }, tree.prune(dataset, node)?)
        }
        MoveKind::Change => {
            let node = pick(rng, &tree.decision_nodes());
            let (feature, threshold) = space.pair_at(rng.random_range(0..space.total_pairs()));
            (
                MoveDetail::Change { node, feature, threshold },
                tree.change(dataset, node, feature, threshold)?,
            )
        }
        MoveKind::Swap => {
            let decisions = tree.decision_nodes();
            let i = rng.random_range(0..decisions.len());
            let mut j = rng.random_range(0..decisions.len() - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (decisions[i], decisions[j]);
            (MoveDetail::Swap { a, b }, tree.swap(dataset, a, b)?)
        }
    };
    let log_q_fwd = log_proposal_prob(tree, &candidate, kind, probs, space, prior.max_depth)?;
    let log_q_rev = log_proposal_prob(&candidate, tree, kind.reverse(), probs, space, prior.max_depth)?;
    let log_post = log_posterior(&candidate, space, prior);
    Ok(Proposal {
        kind,
        detail,
        alpha: acceptance_ratio(current_log_post, log_post, log_q_fwd, log_q_rev),
        candidate,
        log_q_fwd,
        log_q_rev,
        log_posterior: log_post,
    })
}

#[derive(Debug, PartialEq)]
enum Delta<F> {
    Grown { node: NodeId, feature: usize, threshold: F },
    Pruned { node: NodeId },
    Rule { node: NodeId, from: (usize, F), to: (usize, F) },
}

/// Node-by-node differences between two trees, with ids from `from`.
/// `None` when the shapes differ in a way no single move explains.
fn diff<F: Scalar>(from: &Tree<F>, to: &Tree<F>) -> Option<Vec<Delta<F>>> {
    fn walk<F: Scalar>(from: &Tree<F>, a: NodeId, to: &Tree<F>, b: NodeId, out: &mut Vec<Delta<F>>) -> bool {
        let (na, nb) = (&from.nodes()[a].kind, &to.nodes()[b].kind);
        match (na, nb) {
            (NodeKind::Leaf { .. }, NodeKind::Leaf { .. }) => true,
            (
                &NodeKind::Decision {
                    feature: fa,
                    threshold: ta,
                    left: la,
                    right: ra,
                },
                &NodeKind::Decision {
                    feature: fb,
                    threshold: tb,
                    left: lb,
                    right: rb,
                },
            ) => {
                if fa != fb || ta != tb {
                    out.push(Delta::Rule {
                        node: a,
                        from: (fa, ta),
                        to: (fb, tb),
                    });
                }
                walk(from, la, to, lb, out) && walk(from, ra, to, rb, out)
            }
            (NodeKind::Leaf { .. }, &NodeKind::Decision { feature, threshold, .. }) => {
                if to.has_leaf_children(b) {
                    out.push(Delta::Grown { node: a, feature, threshold });
                    true
                } else {
                    false
                }
            }
            (NodeKind::Decision { .. }, NodeKind::Leaf { .. }) => {
                if from.has_leaf_children(a) {
                    out.push(Delta::Pruned { node: a });
                    true
                } else {
                    false
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(from, ROOT, to, ROOT, &mut out).then_some(out)
}

/// Exact `log q(from -> to)` for a move of kind `kind`, evaluated on
/// `from`'s node counts. Fails with [`Error::Unreachable`] when `to` cannot
/// be produced from `from` by one such move.
pub fn log_proposal_prob<F: Scalar>(
    from: &Tree<F>,
    to: &Tree<F>,
    kind: MoveKind,
    probs: &MoveProbabilities,
    space: &SplitSpace<'_, F>,
    max_depth: Option<usize>,
) -> Result<F> {
    let unreachable = || Error::Unreachable(kind);
    let feasible = feasible_moves(from, max_depth);
    let log_kind = log_kind_prob::<F>(kind, probs, feasible).ok_or_else(unreachable)?;
    let deltas = diff(from, to).ok_or_else(unreachable)?;
    let ln = |n: usize| F::of_usize(n).ln();
    match kind {
        MoveKind::Grow => match deltas.as_slice() {
            &[Delta::Grown { node, feature, threshold }]
                if max_depth.is_none_or(|d| from.nodes()[node].depth < d) && space.contains(feature, threshold) =>
            {
                let growable = from.growable_leaves(max_depth).len();
                Ok(log_kind - ln(growable) - ln(space.n_features()) - ln(space.threshold_count(feature)))
            }
            _ => Err(unreachable()),
        },
        MoveKind::Prune => match deltas.as_slice() {
            &[Delta::Pruned { node }] if node != ROOT => Ok(log_kind - ln(from.prunable_nodes().len())),
            _ => Err(unreachable()),
        },
        MoveKind::Change => match deltas.as_slice() {
            [] => Ok(log_kind - ln(from.n_decisions()) - ln(space.total_pairs())),
            [Delta::Rule { to: (f, t), .. }] if space.contains(*f, *t) => {
                Ok(log_kind - ln(from.n_decisions()) - ln(space.total_pairs()))
            }
            _ => Err(unreachable()),
        },
        MoveKind::Swap => {
            let swapped = match deltas.as_slice() {
                [] => true,
                [Delta::Rule { from: fa, to: ta, .. }, Delta::Rule { from: fb, to: tb, .. }] => fa == tb && fb == ta,
                _ => false,
            };
            if !swapped {
                return Err(unreachable());
            }
            let d = from.n_decisions();
            Ok(log_kind - ln(d * (d - 1) / 2))
        }
    }
}
