//! Two-phase Monte Carlo oracle for `θ = E[Y(Ā^{d'}, J̄)]`, where `J̄` is an
//! independent draw from the law of the mediator path under `d*`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::Scm;
use crate::math::sqrt;
use crate::par::try_map_indexed;
use crate::policy::PolicyPair;
use crate::rng::{derive_seed, mix64, NoiseStream};
use crate::{Error, Result};

const CHUNK: usize = 8192;

/// How `J̄` is drawn. Only the marginal law of the mediator path is
/// supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    #[default]
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub conditioning: Conditioning,
}

impl OracleConfig {
    pub fn new(replications: usize, seed: u64) -> Self {
        OracleConfig { replications, seed, conditioning: Conditioning::Marginal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub theta: f64,
    /// Monte Carlo standard error.
    pub se: f64,
    pub replications: usize,
}

/// Raw phase-two draws: the mediator path `J̄` given to each rollout
/// (row-major, `tau` values per rollout) and the resulting outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSamples {
    pub mediators: Vec<f64>,
    pub outcomes: Vec<f64>,
}

/// Exogenous noise of oracle phase 1 (mediator paths under `d*`) or phase 2
/// (outcomes under `d'`).
pub fn phase_noise(seed: u64, phase: u64) -> NoiseStream {
    NoiseStream::new(derive_seed(seed, &[phase]))
}

fn chunked<F>(total: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let chunks = total.div_ceil(CHUNK);
    let parts = try_map_indexed(chunks, |c| {
        let mut out = Vec::new();
        for r in c * CHUNK..((c + 1) * CHUNK).min(total) {
            out.extend(f(r)?);
        }
        Ok(out)
    })?;
    Ok(parts.concat())
}

/// Phase 1 collects `R` mediator paths under `d*`. Phase 2 runs `R`
/// independent rollouts under `d'`, each with its mediators overwritten by a
/// path drawn uniformly from phase 1, and records `Y`.
pub fn oracle_samples(scm: &Scm, pair: &PolicyPair, config: &OracleConfig) -> Result<OracleSamples> {
    let r_total = config.replications;
    if r_total == 0 {
        return Err(Error::InvalidParameter("oracle replications must be >= 1".into()));
    }
    let tau = scm.tau();
    let phase1 = phase_noise(config.seed, 1);
    let paths = chunked(r_total, |r| {
        let traj = scm.rollout(&pair.d_star, &phase1, r as u64, None)?;
        Ok((1..=tau).map(|t| traj[scm.mediator_node(t)]).collect())
    })?;
    let phase2 = phase_noise(config.seed, 2);
    let pick_seed = derive_seed(config.seed, &[3]);
    let draws = chunked(r_total, |r| {
        let idx = ((mix64(pick_seed ^ mix64(r as u64)) as u128 * r_total as u128) >> 64) as usize;
        let j = &paths[idx * tau..(idx + 1) * tau];
        let traj = scm.rollout(&pair.d_prime, &phase2, r as u64, Some(j))?;
        let mut row = j.to_vec();
        row.push(traj[scm.outcome_node()]);
        Ok(row)
    })?;
    let mut mediators = Vec::with_capacity(r_total * tau);
    let mut outcomes = Vec::with_capacity(r_total);
    for row in draws.chunks_exact(tau + 1) {
        mediators.extend_from_slice(&row[..tau]);
        outcomes.push(row[tau]);
    }
    Ok(OracleSamples { mediators, outcomes })
}

/// Monte Carlo value of `θ` with its standard error `sd / √R`.
pub fn oracle_theta(scm: &Scm, pair: &PolicyPair, config: &OracleConfig) -> Result<OracleEstimate> {
    let samples = oracle_samples(scm, pair, config)?;
    let r = samples.outcomes.len() as f64;
    let theta = samples.outcomes.iter().sum::<f64>() / r;
    let ss: f64 = samples.outcomes.iter().map(|y| (y - theta) * (y - theta)).sum();
    let sd = if r > 1.0 { sqrt(ss / (r - 1.0)) } else { 0.0 };
    Ok(OracleEstimate { theta, se: sd / sqrt(r), replications: config.replications })
}
