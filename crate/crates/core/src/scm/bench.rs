//! Replicate benchmark: simulate, estimate, compare with a known truth.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::Scm;
use crate::engine::{estimate_theta, EstimatorConfig};
use crate::math::{abs, sqrt, Z_975};
use crate::panel::PanelDataset;
use crate::par::try_map_indexed;
use crate::policy::PolicyPair;
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub estimate: f64,
    pub se: Option<f64>,
}

/// Summary statistics, each with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub n: usize,
    pub replicates: usize,
    pub truth: f64,
    /// `n` times the mean squared error.
    pub n_mse: f64,
    pub n_mse_se: f64,
    /// Share of 95% Wald intervals containing the truth; undefined when the
    /// estimator reports no standard error.
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    pub bias: f64,
    pub bias_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub summary: BenchmarkSummary,
    pub outcomes: Vec<ReplicateOutcome>,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let m = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (m, sqrt(ss / (r - 1.0) / r))
}

/// Runs `estimator` on `replicates` independent samples of size `n`.
/// Replicate `r` simulates with seed `derive_seed(seed, [r, 0])` and
/// passes `derive_seed(seed, [r, 1])` to the estimator, so a longer run
/// with the same seed extends a shorter one.
pub fn benchmark_with<F>(scm: &Scm, n: usize, replicates: usize, seed: u64, truth: f64, estimator: F) -> Result<BenchmarkReport>
where
    F: Fn(&PanelDataset, u64) -> Result<(f64, Option<f64>)> + Sync + Send,
{
    if replicates == 0 {
        return Err(Error::InvalidParameter("benchmark replicates must be >= 1".into()));
    }
    let outcomes = try_map_indexed(replicates, |r| {
        let data = scm.simulate(n, derive_seed(seed, &[r as u64, 0]))?;
        let (estimate, se) = estimator(&data, derive_seed(seed, &[r as u64, 1]))?;
        Ok(ReplicateOutcome { replicate: r, estimate, se })
    })?;
    let nf = n as f64;
    let scaled_sq: Vec<f64> = outcomes.iter().map(|o| nf * (o.estimate - truth) * (o.estimate - truth)).collect();
    let errors: Vec<f64> = outcomes.iter().map(|o| o.estimate - truth).collect();
    let (n_mse, n_mse_se) = mean_and_se(&scaled_sq);
    let (bias, bias_se) = mean_and_se(&errors);
    let (coverage, coverage_se) = if outcomes.iter().all(|o| o.se.is_some()) {
        let hits = outcomes
            .iter()
            .filter(|o| abs(o.estimate - truth) <= Z_975 * o.se.unwrap_or(0.0))
            .count();
        let c = hits as f64 / replicates as f64;
        (Some(c), Some(sqrt(c * (1.0 - c) / replicates as f64)))
    } else {
        (None, None)
    };
    Ok(BenchmarkReport {
        summary: BenchmarkSummary { n, replicates, truth, n_mse, n_mse_se, coverage, coverage_se, bias, bias_se },
        outcomes,
    })
}

/// Benchmark of the one-step estimator; each replicate uses `config` with
/// its seed replaced by the replicate's estimator seed.
pub fn benchmark(
    scm: &Scm,
    pair: &PolicyPair,
    n: usize,
    replicates: usize,
    seed: u64,
    truth: f64,
    config: &EstimatorConfig,
) -> Result<BenchmarkReport> {
    config.validate()?;
    benchmark_with(scm, n, replicates, seed, truth, |data, s| {
        let mut c = config.clone();
        c.seed = s;
        let report = estimate_theta(data, pair, &c)?;
        Ok((report.theta, Some(report.se)))
    })
}
