use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iterations and runtime needed to collect `samples` draws on `cores`
/// workers at a given acceptance rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupEstimate {
    pub samples: u64,
    pub cores: u64,
    pub acceptance_rate: f64,
    pub iterations_per_minute: f64,
    /// `(S / C) / pr`
    pub iterations_needed: f64,
    /// `i / t`, in minutes.
    pub runtime: f64,
    /// `runtime / C`, as the formula is usually printed.
    pub speedup_literal: f64,
    /// Serial runtime over parallel runtime.
    pub speedup_ratio: f64,
}

pub fn speedup_model(samples: u64, cores: u64, acceptance_rate: f64, iterations_per_minute: f64) -> Result<SpeedupEstimate> {
    if samples == 0 || cores == 0 {
        return Err(Error::Config("samples and cores must be at least 1".into()));
    }
    if !(acceptance_rate > 0.0 && acceptance_rate <= 1.0) {
        return Err(Error::Config(format!("acceptance rate {acceptance_rate} is outside (0, 1]")));
    }
    if !(iterations_per_minute > 0.0 && iterations_per_minute.is_finite()) {
        return Err(Error::Config(format!("iteration rate {iterations_per_minute} must be positive")));
    }
    let iterations = |c: u64| (samples as f64 / c as f64) / acceptance_rate;
    let needed = iterations(cores);
    let runtime = needed / iterations_per_minute;
    Ok(SpeedupEstimate {
        samples,
        cores,
        acceptance_rate,
        iterations_per_minute,
        iterations_needed: needed,
        runtime,
        speedup_literal: runtime / cores as f64,
        speedup_ratio: (iterations(1) / iterations_per_minute) / runtime,
    })
}
