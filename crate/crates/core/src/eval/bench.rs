use serde::{Deserialize, Serialize};

use super::speedup::speedup_model;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sampler::{run_parallel, run_serial, ChainConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub cores: usize,
    pub wall_clock_seconds: f64,
    pub samples: usize,
    pub iterations_run: usize,
    pub theoretical_speedup: f64,
    /// Serial wall clock over this run's wall clock.
    pub measured_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub serial_seconds: f64,
    pub serial_iterations: usize,
    pub serial_acceptance_rate: f64,
    pub rows: Vec<BenchRow>,
}

/// Times the serial sampler once and the parallel sampler for every entry
/// of `core_list`, all collecting `base.target_samples` samples.
pub fn benchmark_speedup<F: Scalar>(dataset: &Dataset<F>, base: &ChainConfig, core_list: &[usize]) -> Result<BenchReport> {
    let target = base
        .target_samples
        .ok_or_else(|| Error::Config("benchmarking needs target_samples".into()))?;
    if core_list.is_empty() {
        return Err(Error::Config("core list is empty".into()));
    }
    if core_list.contains(&0) {
        return Err(Error::Config("core counts must be at least 1".into()));
    }
    let serial = run_serial(dataset, base)?;
    let rate = serial.iterations_run as f64 / serial.wall_clock_seconds.max(f64::MIN_POSITIVE) * 60.0;
    let mut rows = Vec::with_capacity(core_list.len());
    for &cores in core_list {
        let run = run_parallel(dataset, &ChainConfig { workers: cores, ..base.clone() })?;
        let model = speedup_model(target as u64, cores as u64, serial.acceptance_rate.max(f64::MIN_POSITIVE), rate)?;
        log::info!("{cores} cores: {:.3}s for {} samples", run.wall_clock_seconds, run.samples.len());
        rows.push(BenchRow {
            cores,
            wall_clock_seconds: run.wall_clock_seconds,
            samples: run.samples.len(),
            iterations_run: run.iterations_run,
            theoretical_speedup: model.speedup_ratio,
            measured_speedup: serial.wall_clock_seconds / run.wall_clock_seconds.max(f64::MIN_POSITIVE),
        });
    }
    Ok(BenchReport {
        serial_seconds: serial.wall_clock_seconds,
        serial_iterations: serial.iterations_run,
        serial_acceptance_rate: serial.acceptance_rate,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_row_per_core_count() {
        let rows = (0..60).map(|i| vec![(i % 30) as f64]).collect();
        let labels = (0..60).map(|i| usize::from(i % 30 >= 15)).collect();
        let d = Dataset::new(rows, labels, vec!["x".into()]).unwrap();
        let base = ChainConfig {
            iterations: 2000,
            convergence_window: 20,
            target_samples: Some(100),
            ..Default::default()
        };
        let r = benchmark_speedup(&d, &base, &[1, 2, 4]).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.cores).collect::<Vec<_>>(), [1, 2, 4]);
        assert!(r.rows.iter().all(|r| r.samples == 100));
        assert!(r.rows.iter().all(|r| (r.theoretical_speedup - r.cores as f64).abs() < 1e-9));
        assert!(benchmark_speedup(&d, &ChainConfig::default(), &[1]).is_err());
        assert!(benchmark_speedup(&d, &base, &[]).is_err());
    }
}
