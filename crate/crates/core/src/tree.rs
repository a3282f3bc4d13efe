//! Binary classification trees.
//!
//! Nodes live in an arena in preorder with the root at id 0. Structural
//! edits (grow, prune) rebuild the arena so that two structurally equal
//! trees always have identical node ids; payload edits (change, swap) keep
//! ids. Every edit returns a new tree with leaf counts refreshed against the
//! training data and leaves its input untouched.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitSpace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type NodeId = usize;

pub const ROOT: NodeId = 0;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind<F> {
    /// Rows with `x[feature] <= threshold` go left.
    Decision {
        feature: usize,
        threshold: F,
        left: NodeId,
        right: NodeId,
    },
    /// Class histogram of the training rows that reach this leaf.
    Leaf { counts: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<F> {
    pub id: NodeId,
    pub kind: NodeKind<F>,
    pub parent: Option<NodeId>,
    pub depth: usize,
}

impl<F> Node<F> {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "TreeRecord<F>",
    into = "TreeRecord<F>",
    bound = "F: Scalar"
)]
pub struct Tree<F> {
    nodes: Vec<Node<F>>,
    n_classes: usize,
}

enum Edit<F> {
    Keep,
    Collapse,
    Split(usize, F),
}

impl<F: Scalar> Tree<F> {
    /// A lone leaf holding the whole training histogram.
    pub fn single_leaf(dataset: &Dataset<F>) -> Self {
        Self {
            nodes: vec![Node {
                id: ROOT,
                kind: NodeKind::Leaf {
                    counts: dataset.class_histogram(),
                },
                parent: None,
                depth: 0,
            }],
            n_classes: dataset.n_classes(),
        }
    }

    /// The chain's starting state: one root split on a uniformly chosen
    /// non-constant feature and a uniformly chosen threshold from the split
    /// space.
    pub fn init<R: Rng + ?Sized>(dataset: &Dataset<F>, space: &SplitSpace<'_, F>, rng: &mut R) -> Result<Self> {
        let candidates: Vec<usize> = (0..dataset.n_features())
            .filter(|&f| dataset.unique_values(f).len() >= 2)
            .collect();
        if candidates.is_empty() {
            return Err(Error::NoSplittableFeature);
        }
        let feature = candidates[rng.random_range(0..candidates.len())];
        let thresholds = space.thresholds(feature);
        let threshold = thresholds[rng.random_range(0..thresholds.len())];
        Self::single_leaf(dataset).grow(dataset, ROOT, feature, threshold)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn nodes(&self) -> &[Node<F>] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node<F>> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Maximum node depth; the root has depth 0.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// `(feature, threshold)` of a decision node.
    pub fn split_of(&self, id: NodeId) -> Option<(usize, F)> {
        match self.nodes.get(id)?.kind {
            NodeKind::Decision { feature, threshold, .. } => Some((feature, threshold)),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn children(&self, id: NodeId) -> Option<(NodeId, NodeId)> {
        match self.nodes.get(id)?.kind {
            NodeKind::Decision { left, right, .. } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn counts(&self, id: NodeId) -> Option<&[u64]> {
        match &self.nodes.get(id)?.kind {
            NodeKind::Leaf { counts } => Some(counts),
            NodeKind::Decision { .. } => None,
        }
    }

    pub fn decision_nodes(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| !n.is_leaf()).map(|n| n.id).collect()
    }

    pub fn leaf_nodes(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect()
    }

    pub fn n_decisions(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Decision nodes that may be pruned: not the root, both children leaves.
    pub fn prunable_nodes(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.id != ROOT && self.has_leaf_children(n.id))
            .map(|n| n.id)
            .collect()
    }

    /// Leaves that may be split without exceeding `max_depth`.
    pub fn growable_leaves(&self, max_depth: Option<usize>) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.is_leaf() && max_depth.is_none_or(|d| n.depth < d))
            .map(|n| n.id)
            .collect()
    }

    pub(crate) fn has_leaf_children(&self, id: NodeId) -> bool {
        match self.nodes[id].kind {
            NodeKind::Decision { left, right, .. } => self.nodes[left].is_leaf() && self.nodes[right].is_leaf(),
            NodeKind::Leaf { .. } => false,
        }
    }

    /// Id of the leaf that `x` falls into.
    #[inline]
    pub fn route(&self, x: &[F]) -> NodeId {
        let mut id = ROOT;
        loop {
            match self.nodes[id].kind {
                NodeKind::Decision {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
                NodeKind::Leaf { .. } => return id,
            }
        }
    }

    /// Majority class of the leaf `x` reaches, lowest index on ties.
    pub fn predict_class(&self, x: &[F]) -> usize {
        let counts = self.counts(self.route(x)).expect("route ends at a leaf");
        argmax_u64(counts)
    }

    /// Recomputes every leaf histogram from `dataset`.
    pub fn refresh_counts(&mut self, dataset: &Dataset<F>) {
        for node in &mut self.nodes {
            if let NodeKind::Leaf { counts } = &mut node.kind {
                counts.clear();
                counts.resize(self.n_classes, 0);
            }
        }
        for (row, &label) in dataset.rows().zip(dataset.labels()) {
            let leaf = self.route(row);
            if let NodeKind::Leaf { counts } = &mut self.nodes[leaf].kind {
                counts[label] += 1;
            }
        }
    }

    pub fn refreshed(mut self, dataset: &Dataset<F>) -> Self {
        self.refresh_counts(dataset);
        self
    }

    /// Replaces `leaf` with a split on `(feature, threshold)` and two new leaves.
    pub fn grow(&self, dataset: &Dataset<F>, leaf: NodeId, feature: usize, threshold: F) -> Result<Self> {
        match self.nodes.get(leaf) {
            Some(n) if n.is_leaf() => {}
            _ => return Err(Error::InvalidEdit(format!("grow target {leaf} is not a leaf"))),
        }
        self.check_payload(dataset, feature, threshold)?;
        Ok(self
            .rebuild(|id| if id == leaf { Edit::Split(feature, threshold) } else { Edit::Keep })
            .refreshed(dataset))
    }

    /// Collapses a bottom split (both children leaves, not the root) into a leaf.
    pub fn prune(&self, dataset: &Dataset<F>, node: NodeId) -> Result<Self> {
        if node == ROOT {
            return Err(Error::InvalidEdit("the root cannot be pruned".into()));
        }
        if node >= self.nodes.len() || !self.has_leaf_children(node) {
            return Err(Error::InvalidEdit(format!(
                "prune target {node} is not a decision node with two leaf children"
            )));
        }
        Ok(self
            .rebuild(|id| if id == node { Edit::Collapse } else { Edit::Keep })
            .refreshed(dataset))
    }

    /// Rewrites the split rule of a decision node.
    pub fn change(&self, dataset: &Dataset<F>, node: NodeId, feature: usize, threshold: F) -> Result<Self> {
        self.check_payload(dataset, feature, threshold)?;
        let mut out = self.clone();
        match out.nodes.get_mut(node).map(|n| &mut n.kind) {
            Some(NodeKind::Decision {
                feature: f,
                threshold: t,
                ..
            }) => {
                *f = feature;
                *t = threshold;
            }
            _ => return Err(Error::InvalidEdit(format!("change target {node} is not a decision node"))),
        }
        Ok(out.refreshed(dataset))
    }

    /// Exchanges the split rules of two distinct decision nodes.
    pub fn swap(&self, dataset: &Dataset<F>, a: NodeId, b: NodeId) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidEdit("swap targets must differ".into()));
        }
        let (pa, pb) = match (self.split_of(a), self.split_of(b)) {
            (Some(pa), Some(pb)) => (pa, pb),
            _ => return Err(Error::InvalidEdit(format!("swap targets {a}, {b} must be decision nodes"))),
        };
        let mut out = self.clone();
        out.set_split(a, pb);
        out.set_split(b, pa);
        Ok(out.refreshed(dataset))
    }

    fn set_split(&mut self, id: NodeId, (feature, threshold): (usize, F)) {
        if let NodeKind::Decision {
            feature: f,
            threshold: t,
            ..
        } = &mut self.nodes[id].kind
        {
            *f = feature;
            *t = threshold;
        }
    }

    fn check_payload(&self, dataset: &Dataset<F>, feature: usize, threshold: F) -> Result<()> {
        if feature >= dataset.n_features() {
            return Err(Error::FeatureOutOfRange {
                feature,
                n_features: dataset.n_features(),
            });
        }
        if !threshold.is_finite() {
            return Err(Error::InvalidEdit("threshold must be finite".into()));
        }
        Ok(())
    }

    fn rebuild(&self, edit: impl Fn(NodeId) -> Edit<F>) -> Self {
        let mut nodes = Vec::with_capacity(self.nodes.len() + 2);
        self.emit(ROOT, None, 0, &edit, &mut nodes);
        Self {
            nodes,
            n_classes: self.n_classes,
        }
    }

    fn emit(
        &self,
        old: NodeId,
        parent: Option<NodeId>,
        depth: usize,
        edit: &impl Fn(NodeId) -> Edit<F>,
        out: &mut Vec<Node<F>>,
    ) -> NodeId {
        let id = out.len();
        let leaf = |id, parent, depth| Node {
            id,
            kind: NodeKind::Leaf {
                counts: vec![0; self.n_classes],
            },
            parent,
            depth,
        };
        let split = match (edit(old), &self.nodes[old].kind) {
            (Edit::Collapse, _) | (Edit::Keep, NodeKind::Leaf { .. }) => {
                out.push(leaf(id, parent, depth));
                return id;
            }
            (Edit::Split(feature, threshold), _) => {
                out.push(Node {
                    id,
                    kind: NodeKind::Decision {
                        feature,
                        threshold,
                        left: id + 1,
                        right: id + 2,
                    },
                    parent,
                    depth,
                });
                out.push(leaf(id + 1, Some(id), depth + 1));
                out.push(leaf(id + 2, Some(id), depth + 1));
                return id;
            }
            (Edit::Keep, &NodeKind::Decision {
                feature,
                threshold,
                left,
                right,
            }) => (feature, threshold, left, right),
        };
        let (feature, threshold, old_left, old_right) = split;
        out.push(Node {
            id,
            kind: NodeKind::Decision {
                feature,
                threshold,
                left: 0,
                right: 0,
            },
            parent,
            depth,
        });
        let l = self.emit(old_left, Some(id), depth + 1, edit, out);
        let r = self.emit(old_right, Some(id), depth + 1, edit, out);
        if let NodeKind::Decision { left, right, .. } = &mut out[id].kind {
            *left = l;
            *right = r;
        }
        id
    }

    /// Checks the structural invariants: preorder ids, one parent per
    /// non-root node, consistent depths and count-vector lengths.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidTree("tree has no nodes".into()));
        }
        let mut next = 0;
        self.validate_from(ROOT, None, 0, &mut next)?;
        if next != self.nodes.len() {
            return Err(Error::InvalidTree(format!(
                "{} of {} nodes unreachable from the root",
                self.nodes.len() - next,
                self.nodes.len()
            )));
        }
        Ok(())
    }

    fn validate_from(&self, id: NodeId, parent: Option<NodeId>, depth: usize, next: &mut usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTree(msg));
        if id != *next {
            return bad(format!("node {id} is not in preorder position {next}"));
        }
        let node = &self.nodes[id];
        if node.id != id || node.parent != parent || node.depth != depth {
            return bad(format!("node {id} has inconsistent id/parent/depth"));
        }
        *next += 1;
        match &node.kind {
            NodeKind::Leaf { counts } => {
                if counts.len() != self.n_classes {
                    return bad(format!("leaf {id} has {} counts for {} classes", counts.len(), self.n_classes));
                }
            }
            NodeKind::Decision {
                left,
                right,
                threshold,
                ..
            } => {
                if !threshold.is_finite() {
                    return bad(format!("node {id} has a non-finite threshold"));
                }
                if *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return bad(format!("node {id} has an out-of-range child"));
                }
                self.validate_from(*left, Some(id), depth + 1, next)?;
                self.validate_from(*right, Some(id), depth + 1, next)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn argmax_u64(values: &[u64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
struct TreeRecord<F> {
    n_classes: usize,
    nodes: Vec<NodeRecord<F>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
struct NodeRecord<F> {
    id: NodeId,
    kind: RecordKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<F>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<[NodeId; 2]>,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum RecordKind {
    Decision,
    Leaf,
}

impl<F: Scalar> From<Tree<F>> for TreeRecord<F> {
    fn from(tree: Tree<F>) -> Self {
        let nodes = tree
            .nodes
            .into_iter()
            .map(|n| match n.kind {
                NodeKind::Decision {
                    feature,
                    threshold,
                    left,
                    right,
                } => NodeRecord {
                    id: n.id,
                    kind: RecordKind::Decision,
                    feature: Some(feature),
                    threshold: Some(threshold),
                    counts: None,
                    children: Some([left, right]),
                },
                NodeKind::Leaf { counts } => NodeRecord {
                    id: n.id,
                    kind: RecordKind::Leaf,
                    feature: None,
                    threshold: None,
                    counts: Some(counts),
                    children: None,
                },
            })
            .collect();
        Self {
            n_classes: tree.n_classes,
            nodes,
        }
    }
}

impl<F: Scalar> TryFrom<TreeRecord<F>> for Tree<F> {
    type Error = Error;

    fn try_from(record: TreeRecord<F>) -> Result<Self> {
        let mut nodes: Vec<Node<F>> = Vec::with_capacity(record.nodes.len());
        for (pos, r) in record.nodes.into_iter().enumerate() {
            if r.id != pos {
                return Err(Error::InvalidTree(format!("node at position {pos} has id {}", r.id)));
            }
            let kind = match r.kind {
                RecordKind::Decision => match (r.feature, r.threshold, r.children) {
                    (Some(feature), Some(threshold), Some([left, right])) => NodeKind::Decision {
                        feature,
                        threshold,
                        left,
                        right,
                    },
                    _ => {
                        return Err(Error::InvalidTree(format!(
                            "decision node {pos} needs feature, threshold and children"
                        )))
                    }
                },
                RecordKind::Leaf => NodeKind::Leaf {
                    counts: r
                        .counts
                        .ok_or_else(|| Error::InvalidTree(format!("leaf {pos} has no counts")))?,
                },
            };
            nodes.push(Node {
                id: pos,
                kind,
                parent: None,
                depth: 0,
            });
        }
        // parents and depths are implied by the child links
        let n = nodes.len();
        let mut stack = vec![(ROOT, None, 0usize)];
        let mut visited = 0usize;
        while let Some((id, parent, depth)) = stack.pop() {
            visited += 1;
            if visited > n {
                return Err(Error::InvalidTree("child links revisit a node".into()));
            }
            let node = nodes
                .get_mut(id)
                .ok_or_else(|| Error::InvalidTree(format!("child id {id} out of range")))?;
            node.parent = parent;
            node.depth = depth;
            if let NodeKind::Decision { left, right, .. } = node.kind {
                stack.push((right, Some(id), depth + 1));
                stack.push((left, Some(id), depth + 1));
            }
        }
        let tree = Tree {
            nodes,
            n_classes: record.n_classes,
        };
        tree.validate()?;
        Ok(tree)
    }
}
