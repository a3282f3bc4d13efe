use std::collections::HashMap;
use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::Tree;

/// Posterior-averaged predictor over a list of sampled trees.
///
/// Samples sharing one `Arc` are folded into a single weighted member, so
/// the long runs of repeats a chain produces cost nothing extra.
#[derive(Debug, Clone)]
pub struct Ensemble<F> {
    members: Vec<(Arc<Tree<F>>, usize)>,
    n_samples: usize,
    n_classes: usize,
    eps: F,
}

impl<F: Scalar> Ensemble<F> {
    pub fn new(samples: &[Arc<Tree<F>>], eps: F) -> Result<Self> {
        let first = samples.first().ok_or(Error::NoSamples)?;
        let n_classes = first.n_classes();
        if let Some(t) = samples.iter().find(|t| t.n_classes() != n_classes) {
            return Err(Error::InvalidTree(format!(
                "sample with {} classes among samples with {n_classes}",
                t.n_classes()
            )));
        }
        let mut index: HashMap<*const Tree<F>, usize> = HashMap::new();
        let mut members: Vec<(Arc<Tree<F>>, usize)> = Vec::new();
        for tree in samples {
            let slot = *index.entry(Arc::as_ptr(tree)).or_insert_with(|| {
                members.push((Arc::clone(tree), 0));
                members.len() - 1
            });
            members[slot].1 += 1;
        }
        Ok(Self {
            members,
            n_samples: samples.len(),
            n_classes,
            eps,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_unique(&self) -> usize {
        self.members.len()
    }

    /// Mean smoothed leaf distribution reached by `x`, and its argmax
    /// (lowest index on ties).
    pub fn predict(&self, x: &[F]) -> (usize, Vec<F>) {
        let l = F::of_usize(self.n_classes);
        let mut probs = vec![F::zero(); self.n_classes];
        for (tree, weight) in &self.members {
            let counts = tree.counts(tree.route(x)).expect("route ends at a leaf");
            let n = F::of(counts.iter().sum::<u64>() as f64);
            let w = F::of_usize(*weight);
            for (p, &c) in probs.iter_mut().zip(counts) {
                *p = *p + w * (F::of(c as f64) + self.eps) / (n + l * self.eps);
            }
        }
        let total = F::of_usize(self.n_samples);
        for p in &mut probs {
            *p = *p / total;
        }
        let label = (1..probs.len()).fold(0, |b, j| if probs[j] > probs[b] { j } else { b });
        (label, probs)
    }

    pub fn predict_labels(&self, dataset: &Dataset<F>) -> Vec<usize> {
        dataset.rows().map(|x| self.predict(x).0).collect()
    }
}

/// One-shot form of [`Ensemble::predict`].
pub fn predict<F: Scalar>(samples: &[Arc<Tree<F>>], x: &[F], eps: F) -> Result<(usize, Vec<F>)> {
    Ok(Ensemble::new(samples, eps)?.predict(x))
}
