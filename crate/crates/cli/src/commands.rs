use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use dtree_mcmc::eval::{
    benchmark_speedup, classification_metrics, compare_samplers, cross_validate, CvConfig, Ensemble, MetricsReport,
    SamplerKind,
};
use dtree_mcmc::export::{metrics_table, ttest_table, write_diagnostics_csv, write_json, write_speedup_csv, write_text, SamplesFile};
use dtree_mcmc::{read_feature_csv, ChainConfig, Dataset, Error, Scalar};

use crate::config::{Precision, RunConfig};
use crate::error::CliError;

/// Files a command wrote and the text it prints.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|source| CliError::Output {
        path: cfg.out.display().to_string(),
        source,
    })?;
    Ok(&cfg.out)
}

/// Runs a writer and reports failures as output errors.
fn emit(path: PathBuf, files: &mut Vec<PathBuf>, write: impl FnOnce(&Path) -> dtree_mcmc::Result<()>) -> Result<(), CliError> {
    write(&path).map_err(|e| match e {
        Error::Io { path, source } => CliError::Output {
            path: path.display().to_string(),
            source,
        },
        other => CliError::Core(other),
    })?;
    files.push(path);
    Ok(())
}

fn write_csv_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> dtree_mcmc::Result<()>) -> dtree_mcmc::Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f(BufWriter::new(file))
}

fn load<F: Scalar>(cfg: &RunConfig) -> Result<Dataset<F>, CliError> {
    Ok(Dataset::from_csv(cfg.data_path()?, &cfg.label_col)?)
}

macro_rules! by_precision {
    ($cfg:expr, $f:ident) => {
        match $cfg.precision {
            Precision::F64 => $f::<f64>($cfg),
            Precision::F32 => $f::<f32>($cfg),
        }
    };
}

#[derive(Serialize)]
struct FitMetrics {
    sampler: SamplerKind,
    iterations_run: usize,
    samples: usize,
    unique_trees: usize,
    fresh_acceptances: usize,
    acceptance_rate: f64,
    convergence_iteration: Option<usize>,
    collection_start: Option<usize>,
    training: MetricsReport,
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    by_precision!(cfg, fit)
}

fn fit<F: Scalar>(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate_chain()?;
    let ds = load::<F>(cfg)?;
    let sampler = cfg.sampler_kind();
    let result = sampler.run(&ds, &cfg.chain)?;
    if result.samples.is_empty() {
        log::error!(
            "no samples after {} iterations: the F1 trace never settled (raise iterations or convergence_tol)",
            result.iterations_run
        );
        return Err(Error::NoSamples.into());
    }
    log::info!(
        "{} iterations in {:.2}s, {} samples",
        result.iterations_run,
        result.wall_clock_seconds,
        result.samples.len()
    );
    let dir = out_dir(cfg)?;
    let ensemble = Ensemble::new(&result.sample_trees(), F::of(cfg.chain.prior.smoothing_eps))?;
    let training = classification_metrics(&ensemble.predict_labels(&ds), ds.labels(), ds.n_classes())?;
    let samples = SamplesFile::from_result(&result, ds.feature_names(), ds.class_names(), cfg.chain.prior.smoothing_eps);
    let metrics = FitMetrics {
        sampler,
        iterations_run: result.iterations_run,
        samples: result.samples.len(),
        unique_trees: samples.trees.len(),
        fresh_acceptances: result.fresh_acceptances,
        acceptance_rate: result.acceptance_rate,
        convergence_iteration: result.convergence_iteration,
        collection_start: result.collection_start,
        training,
    };
    let mut files = Vec::new();
    emit(dir.join("samples.json"), &mut files, |p| samples.write(p))?;
    emit(dir.join("diagnostics.csv"), &mut files, |p| {
        write_csv_file(p, |w| write_diagnostics_csv(&result, w))
    })?;
    emit(dir.join("metrics.json"), &mut files, |p| write_json(&metrics, p))?;
    let summary = format!(
        "sampler {} | {} samples ({} fresh, acceptance {:.3})\n{}",
        sampler,
        metrics.samples,
        metrics.fresh_acceptances,
        metrics.acceptance_rate,
        metrics_table(&metrics.training, ds.class_names())
    );
    Ok(Outcome { files, summary })
}

#[derive(Serialize)]
struct FoldSummary {
    fold_index: usize,
    test_rows: usize,
    samples: usize,
    unique_trees: usize,
    acceptance_rate: f64,
    convergence_iteration: Option<usize>,
    mean_sample_f1: f64,
    metrics: MetricsReport,
}

#[derive(Serialize)]
struct CvMetrics {
    sampler: SamplerKind,
    folds: usize,
    pooled: MetricsReport,
    mean_fold_accuracy: f64,
    per_fold: Vec<FoldSummary>,
}

fn cv_config(cfg: &RunConfig, sampler: SamplerKind) -> CvConfig {
    CvConfig {
        folds: cfg.folds,
        stratified: cfg.stratified,
        split_seed: cfg.split_seed(),
        chain: cfg.chain.clone(),
        sampler,
    }
}

pub fn cmd_cv(cfg: &RunConfig) -> Result<Outcome, CliError> {
    by_precision!(cfg, cv)
}

fn cv<F: Scalar>(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate_chain()?;
    cfg.validate_folds()?;
    let ds = load::<F>(cfg)?;
    let report = cross_validate(&ds, &cv_config(cfg, cfg.sampler_kind()))?;
    let metrics = CvMetrics {
        sampler: report.sampler,
        folds: report.folds.len(),
        mean_fold_accuracy: report.mean_fold_accuracy(),
        per_fold: report
            .folds
            .iter()
            .map(|f| FoldSummary {
                fold_index: f.fold_index,
                test_rows: f.truth.len(),
                samples: f.n_samples,
                unique_trees: f.n_unique_trees,
                acceptance_rate: f.acceptance_rate,
                convergence_iteration: f.convergence_iteration,
                mean_sample_f1: f.mean_sample_f1(),
                metrics: f.metrics.clone(),
            })
            .collect(),
        pooled: report.pooled,
    };
    let table = format!(
        "{}-fold cross-validation, sampler {}\n{}",
        metrics.folds,
        metrics.sampler,
        metrics_table(&metrics.pooled, ds.class_names())
    );
    let dir = out_dir(cfg)?;
    let mut files = Vec::new();
    emit(dir.join("metrics.json"), &mut files, |p| write_json(&metrics, p))?;
    emit(dir.join("metrics.txt"), &mut files, |p| write_text(&table, p))?;
    Ok(Outcome { files, summary: table })
}

#[derive(Serialize)]
struct ArmSummary {
    sampler: SamplerKind,
    accuracy: f64,
    macro_f1: f64,
    samples: usize,
    mean_sample_f1: f64,
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    by_precision!(cfg, compare)
}

fn compare<F: Scalar>(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate_chain()?;
    cfg.validate_folds()?;
    cfg.validate_core_list()?;
    let ds = load::<F>(cfg)?;
    let report = compare_samplers(
        &ds,
        &cv_config(cfg, SamplerKind::Serial),
        &cfg.core_list,
        cfg.equivalence_input,
        cfg.significance,
    )?;
    let arms: Vec<ArmSummary> = report
        .reports
        .iter()
        .map(|r| {
            let f1 = r.pooled_sample_f1();
            ArmSummary {
                sampler: r.sampler,
                accuracy: r.pooled.accuracy,
                macro_f1: r.pooled.macro_f1,
                samples: f1.len(),
                mean_sample_f1: f1.iter().sum::<f64>() / f1.len() as f64,
            }
        })
        .collect();
    let mut text = format!(
        "Welch t-test on {} ({}-fold, significance {})\n{}\n",
        report.input,
        cfg.folds,
        report.significance,
        ttest_table(&report)
    );
    for a in &arms {
        text.push_str(&format!(
            "{} cores: accuracy {:.4}, macro f1 {:.4}, {} samples, mean sample f1 {:.4}\n",
            a.sampler, a.accuracy, a.macro_f1, a.samples, a.mean_sample_f1
        ));
    }
    let dir = out_dir(cfg)?;
    let mut files = Vec::new();
    emit(dir.join("ttest_report.txt"), &mut files, |p| write_text(&text, p))?;
    emit(dir.join("compare.json"), &mut files, |p| {
        write_json(&serde_json::json!({ "input": report.input, "rows": report.rows, "arms": arms }), p)
    })?;
    Ok(Outcome { files, summary: text })
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<Outcome, CliError> {
    by_precision!(cfg, bench)
}

fn bench<F: Scalar>(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate_chain()?;
    cfg.validate_core_list()?;
    let ds = load::<F>(cfg)?;
    let mut chain: ChainConfig = cfg.chain.clone();
    chain.target_samples.get_or_insert(chain.iterations - chain.burn_in());
    let report = benchmark_speedup(&ds, &chain, &cfg.core_list)?;
    let dir = out_dir(cfg)?;
    let mut files = Vec::new();
    emit(dir.join("speedup.csv"), &mut files, |p| write_csv_file(p, |w| write_speedup_csv(&report, w)))?;
    emit(dir.join("bench.json"), &mut files, |p| write_json(&report, p))?;
    let mut summary = format!("serial: {:.3}s\n", report.serial_seconds);
    for r in &report.rows {
        summary.push_str(&format!(
            "{:>3} cores: {:.3}s, speedup {:.2} (model {:.2})\n",
            r.cores, r.wall_clock_seconds, r.measured_speedup, r.theoretical_speedup
        ));
    }
    Ok(Outcome { files, summary })
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Outcome, CliError> {
    by_precision!(cfg, predict)
}

fn predict<F: Scalar>(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let samples = SamplesFile::<F>::read(cfg.samples_path()?)?;
    let data_path = cfg.data_path()?;
    let file = File::open(data_path).map_err(|source| Error::Io {
        path: data_path.to_path_buf(),
        source,
    })?;
    let table = read_feature_csv::<F, _>(file, Some(&cfg.label_col))?;
    let expected = samples.feature_names.len();
    if let Some(row) = table.rows.iter().find(|r| r.len() != expected) {
        return Err(Error::FeatureCountMismatch { expected, got: row.len() }.into());
    }
    if table.rows.is_empty() && table.feature_names.len() != expected {
        return Err(Error::FeatureCountMismatch {
            expected,
            got: table.feature_names.len(),
        }
        .into());
    }
    let ensemble = Ensemble::new(&samples.sample_trees(), F::of(samples.smoothing_eps))?;
    let dir = out_dir(cfg)?;
    let mut files = Vec::new();
    emit(dir.join("predictions.csv"), &mut files, |p| {
        write_csv_file(p, |mut w| {
            let io = |source| Error::Io {
                path: p.to_path_buf(),
                source,
            };
            let header: Vec<String> = std::iter::once("row".to_string())
                .chain(std::iter::once("label".to_string()))
                .chain(samples.class_names.iter().map(|c| format!("p_{c}")))
                .collect();
            writeln!(w, "{}", header.join(",")).map_err(io)?;
            for (i, row) in table.rows.iter().enumerate() {
                let (label, probs) = ensemble.predict(row);
                let probs: Vec<String> = probs.iter().map(|p| format!("{:.6}", p.to_f64_lossy())).collect();
                writeln!(w, "{i},{},{}", samples.class_names[label], probs.join(",")).map_err(io)?;
            }
            w.flush().map_err(io)
        })
    })?;
    Ok(Outcome {
        files,
        summary: format!("{} rows predicted with {} samples", table.rows.len(), ensemble.n_samples()),
    })
}
