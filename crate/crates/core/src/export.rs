//! File formats: samples JSON, diagnostics CSV and plain-text tables.
//!
//! Nothing written here depends on timing, so two runs with the same
//! configuration produce byte-identical files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{BenchReport, CompareReport, MetricsReport};
use crate::sampler::ChainResult;
use crate::scalar::Scalar;
use crate::tree::Tree;

pub const SAMPLES_SCHEMA: &str = "dtree-mcmc/samples/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry<F> {
    pub tree: usize,
    pub log_posterior: F,
    pub iteration: usize,
    pub fresh: bool,
}

/// Collected samples with each distinct tree stored once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SamplesFile<F> {
    pub schema: String,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub smoothing_eps: f64,
    pub trees: Vec<Tree<F>>,
    pub samples: Vec<SampleEntry<F>>,
}

impl<F: Scalar> SamplesFile<F> {
    pub fn from_result(result: &ChainResult<F>, feature_names: &[String], class_names: &[String], smoothing_eps: f64) -> Self {
        let mut index: HashMap<*const Tree<F>, usize> = HashMap::new();
        let mut trees = Vec::new();
        let samples = result
            .samples
            .iter()
            .map(|s| {
                let tree = *index.entry(Arc::as_ptr(&s.tree)).or_insert_with(|| {
                    trees.push((*s.tree).clone());
                    trees.len() - 1
                });
                SampleEntry {
                    tree,
                    log_posterior: s.log_posterior,
                    iteration: s.iteration,
                    fresh: s.fresh,
                }
            })
            .collect();
        Self {
            schema: SAMPLES_SCHEMA.into(),
            feature_names: feature_names.to_vec(),
            class_names: class_names.to_vec(),
            smoothing_eps,
            trees,
            samples,
        }
    }

    /// One `Arc` per sample, shared between samples of the same tree.
    pub fn sample_trees(&self) -> Vec<Arc<Tree<F>>> {
        let shared: Vec<Arc<Tree<F>>> = self.trees.iter().cloned().map(Arc::new).collect();
        self.samples.iter().map(|s| Arc::clone(&shared[s.tree])).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
        w.flush().map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
        if found != SAMPLES_SCHEMA {
            return Err(Error::Schema {
                found: found.into(),
                expected: SAMPLES_SCHEMA.into(),
            });
        }
        let file: Self = serde_json::from_value(value)?;
        if let Some(s) = file.samples.iter().find(|s| s.tree >= file.trees.len()) {
            return Err(Error::InvalidTree(format!("sample refers to missing tree {}", s.tree)));
        }
        if file.samples.is_empty() {
            return Err(Error::NoSamples);
        }
        if let Some(t) = file.trees.iter().find(|t| t.n_classes() != file.class_names.len()) {
            return Err(Error::InvalidTree(format!(
                "tree with {} classes in a file naming {}",
                t.n_classes(),
                file.class_names.len()
            )));
        }
        Ok(file)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| io_err(path, e))
}

/// `iteration,f1,alpha,log_posterior,yield`, one row per iteration.
pub fn write_diagnostics_csv<F: Scalar, W: Write>(result: &ChainResult<F>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "f1", "alpha", "log_posterior", "yield"])?;
    for i in 0..result.iterations_run {
        w.write_record([
            i.to_string(),
            result.f1_history[i].to_string(),
            result.alpha_history[i].to_string(),
            result.log_posterior_history[i].to_string(),
            result.yield_history[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_text(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// `cores,theoretical_speedup,measured_speedup`, plus timings.
pub fn write_speedup_csv<W: Write>(report: &BenchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cores", "theoretical_speedup", "measured_speedup", "wall_clock_seconds", "samples"])?;
    for r in &report.rows {
        w.write_record([
            r.cores.to_string(),
            format!("{:.4}", r.theoretical_speedup),
            format!("{:.4}", r.measured_speedup),
            format!("{:.4}", r.wall_clock_seconds),
            r.samples.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Per-label precision / recall / F1 followed by the accuracy row.
pub fn metrics_table(report: &MetricsReport, class_names: &[String]) -> String {
    let name = |l: usize| class_names.get(l).cloned().unwrap_or_else(|| l.to_string());
    let width = (0..report.per_label.len()).map(|l| name(l).len()).max().unwrap_or(0).max(8);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>9}  {:>6}  {:>8}  {:>7}", "label", "precision", "recall", "f1-score", "support");
    for m in &report.per_label {
        let _ = writeln!(
            s,
            "{:<width$}  {:>9.2}  {:>6.2}  {:>8.2}  {:>7}",
            name(m.label),
            m.precision,
            m.recall,
            m.f1,
            m.support
        );
    }
    let _ = writeln!(s, "{:<width$}  {:>9}  {:>6}  {:>8.2}  {:>7}", "accuracy", "", "", report.accuracy, report.total);
    let _ = writeln!(s, "{:<width$}  {:>9}  {:>6}  {:>8.2}  {:>7}", "macro f1", "", "", report.macro_f1, report.total);
    s
}

/// One row per compared pair: `|T|`, critical value, degrees of freedom.
pub fn ttest_table(report: &CompareReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14}  {:>9}  {:>9}  {:>9}  {:>9}  {:>10}  {:>6}",
        "test case", "mean 1", "mean 2", "|T|", "critical", "nu", "reject"
    );
    for row in &report.rows {
        let case = format!("{} vs {} cores", row.first, row.second);
        let _ = writeln!(
            s,
            "{:<14}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}  {:>10.2}  {:>6}",
            case,
            row.mean_first,
            row.mean_second,
            row.test.t_statistic.abs(),
            row.test.critical_value,
            row.test.nu,
            if row.test.reject_null { "yes" } else { "no" }
        );
    }
    s
}
