use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_label: Vec<LabelMetrics>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One-vs-rest precision, recall and F1 for labels `0..n_labels`, plus
/// accuracy. Empty denominators give 0.
pub fn classification_metrics(predictions: &[usize], truth: &[usize], n_labels: usize) -> Result<MetricsReport> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch(predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    if let Some(&bad) = predictions.iter().chain(truth).find(|&&l| l >= n_labels) {
        return Err(Error::InvalidDataset(format!("label {bad} is outside 0..{n_labels}")));
    }
    let (mut tp, mut predicted, mut actual) = (vec![0u64; n_labels], vec![0u64; n_labels], vec![0u64; n_labels]);
    for (&p, &t) in predictions.iter().zip(truth) {
        predicted[p] += 1;
        actual[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let per_label: Vec<LabelMetrics> = (0..n_labels)
        .map(|l| {
            let precision = ratio(tp[l], predicted[l]);
            let recall = ratio(tp[l], actual[l]);
            LabelMetrics {
                label: l,
                precision,
                recall,
                f1: f1_of(precision, recall),
                support: actual[l],
            }
        })
        .collect();
    let macro_f1 = per_label.iter().map(|m| m.f1).sum::<f64>() / n_labels as f64;
    Ok(MetricsReport {
        accuracy: ratio(tp.iter().sum(), truth.len() as u64),
        macro_f1,
        per_label,
        total: truth.len() as u64,
    })
}

/// Macro F1 over every label from per-label true positives, predicted
/// positives and actual positives.
pub fn macro_f1_from_counts<F: Scalar>(tp: &[u64], predicted: &[u64], actual: &[u64]) -> F {
    if tp.is_empty() {
        return F::zero();
    }
    let sum: f64 = (0..tp.len())
        .map(|l| f1_of(ratio(tp[l], predicted[l]), ratio(tp[l], actual[l])))
        .sum();
    F::of(sum / tp.len() as f64)
}

/// Macro F1 averaged over the labels that occur in `truth` or
/// `predictions` only.
pub fn macro_f1_present(predictions: &[usize], truth: &[usize], n_labels: usize) -> Result<f64> {
    let report = classification_metrics(predictions, truth, n_labels)?;
    let mut seen = vec![false; n_labels];
    for &l in predictions.iter().chain(truth) {
        seen[l] = true;
    }
    let present: Vec<f64> = report.per_label.iter().filter(|m| seen[m.label]).map(|m| m.f1).collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}
