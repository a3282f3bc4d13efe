//! Ensemble prediction, metrics, Welch's t-test, the speedup model and the
//! cross-validation / benchmark harnesses built on them.

mod bench;
mod cv;
mod ensemble;
mod metrics;
mod speedup;
mod ttest;

pub use bench::{benchmark_speedup, BenchReport, BenchRow};
pub use cv::{
    compare_samplers, cross_validate, fold_seed, CompareReport, CompareRow, CvConfig, CvReport, EquivalenceInput,
    FoldOutcome, SamplerKind,
};
pub use ensemble::{predict, Ensemble};
pub use metrics::{classification_metrics, macro_f1_from_counts, macro_f1_present, LabelMetrics, MetricsReport};
pub use speedup::{speedup_model, SpeedupEstimate};
pub use ttest::{ln_gamma, reg_inc_beta, student_t_cdf, student_t_inv_cdf, welch_t_test, TTestResult};
