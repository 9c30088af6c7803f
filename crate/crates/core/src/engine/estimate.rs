//! One-step, plug-in and IPW estimators and the effect decomposition.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::nuisance::{fit_shared, sequential_regressions, PseudoOutcome, RegressionSetup, SharedNuisance};
use super::{compute_d_functions, Diagnostics, EstimatorConfig};
use crate::math::{mean, sqrt, variance, Z_975};
use crate::panel::{enumerate_mediator_paths, MediatorPath, PanelDataset, Splitting};
use crate::par::try_map_indexed;
use crate::policy::{apply_policy, density_ratios, DensityRatioTable, PolicyPair, PolicySpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub path: Vec<f64>,
    pub phi: f64,
    pub lambda: f64,
}

/// Point estimate with its per-path pieces (no standard error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub theta: f64,
    pub components: Vec<PathComponent>,
}

pub type IpwEstimate = PointEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub theta: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub components: Vec<PathComponent>,
    pub diagnostics: Diagnostics,
    /// Mean of the plug-in-centered influence values; zero up to rounding.
    pub influence_mean: f64,
    /// Per-unit influence values `Ŝ_i`.
    #[serde(skip)]
    pub influence: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub estimate: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectDecomposition {
    pub total: Effect,
    pub direct: Effect,
    pub indirect: Effect,
    /// `θ(d', d')`
    pub theta_prime_prime: f64,
    /// `θ(d', d*)`
    pub theta_prime_star: f64,
    /// `θ(d*, d*)`
    pub theta_star_star: f64,
    pub diagnostics: Diagnostics,
    /// Per-unit influence values of the three contrasts.
    #[serde(skip)]
    pub influence_total: Vec<f64>,
    #[serde(skip)]
    pub influence_direct: Vec<f64>,
    #[serde(skip)]
    pub influence_indirect: Vec<f64>,
}

/// Per-path unit values of the outcome side (`φ`) under the first policy
/// of a pair and the mediator side (`λ`) under the second.
struct PairValues {
    phi: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    diagnostics: Diagnostics,
}

struct Prepared {
    splitting: Splitting,
    paths: Vec<MediatorPath>,
    shared: SharedNuisance,
    coverage: f64,
}

fn prepare(dataset: &PanelDataset, config: &EstimatorConfig) -> Result<Prepared> {
    config.validate()?;
    let splitting = config.splitting(dataset.n())?;
    let paths = enumerate_mediator_paths(dataset, config.paths.mode, config.paths.cap)?;
    if paths.is_empty() {
        return Err(Error::NoUsablePaths);
    }
    let shared = fit_shared(dataset, &config.learners, &splitting, config.seed)?;
    Ok(Prepared { coverage: path_coverage(dataset, &paths), splitting, paths, shared })
}

fn path_coverage(dataset: &PanelDataset, paths: &[MediatorPath]) -> f64 {
    let (mut hit, mut total) = (0.0, 0.0);
    for u in 0..dataset.n() {
        if !dataset.outcome_observed(u) {
            continue;
        }
        let w = dataset.weights().map_or(1.0, |w| w[u]);
        total += w;
        if paths.iter().any(|p| (1..=dataset.tau()).all(|t| dataset.mediator(t)[u] == p.at(t))) {
            hit += w;
        }
    }
    if total > 0.0 {
        hit / total
    } else {
        0.0
    }
}

fn shifted(dataset: &PanelDataset, policy: &PolicySpec) -> Result<Vec<Vec<f64>>> {
    (1..=dataset.tau()).map(|t| apply_policy(policy, dataset, t)).collect()
}

fn pair_ratios(dataset: &PanelDataset, pair: &PolicyPair, prep: &Prepared, q: f64) -> Result<DensityRatioTable> {
    density_ratios(dataset, pair, prep.shared.ratio_inputs(), q)
}

fn run_pair(
    dataset: &PanelDataset,
    pair: &PolicyPair,
    config: &EstimatorConfig,
    prep: &Prepared,
    mode: PseudoOutcome,
) -> Result<PairValues> {
    let ratios = pair_ratios(dataset, pair, prep, config.truncation_quantile)?;
    let shifted_prime = shifted(dataset, &pair.d_prime)?;
    let shifted_star = shifted(dataset, &pair.d_star)?;
    let setup = RegressionSetup {
        dataset,
        shifted_prime: &shifted_prime,
        shifted_star: &shifted_star,
        ratios: &ratios,
        learners: &config.learners,
        splitting: &prep.splitting,
        seed: config.seed,
    };
    let per_path = try_map_indexed(prep.paths.len(), |i| {
        let path = &prep.paths[i];
        let (h, truncated) = ratios.mediator_products(path);
        let table = sequential_regressions(&setup, path, i, &h, mode)?;
        let values = match mode {
            PseudoOutcome::DoublyRobust => {
                let eif = compute_d_functions(dataset, &table, &ratios, &h)?;
                (eif.d_z1, eif.d_m1)
            }
            PseudoOutcome::Plugin => (table.q_z_shifted[0].clone(), table.q_m_shifted[0].clone()),
        };
        Ok((values, truncated, table.subset_fallbacks))
    })?;
    let mut diagnostics = Diagnostics {
        positivity_violations: ratios.positivity_violations,
        truncated_weights: ratios.truncated,
        paths: prep.paths.len(),
        path_coverage: prep.coverage,
        subset_fallbacks: 0,
    };
    let mut phi = Vec::with_capacity(per_path.len());
    let mut lambda = Vec::with_capacity(per_path.len());
    for ((p, l), truncated, fallbacks) in per_path {
        diagnostics.truncated_weights += truncated;
        diagnostics.subset_fallbacks += fallbacks;
        phi.push(p);
        lambda.push(l);
    }
    for v in phi.iter().chain(&lambda).flatten() {
        if !v.is_finite() {
            return Err(Error::NonFinite("D-function value".into()));
        }
    }
    Ok(PairValues { phi, lambda, diagnostics })
}

/// θ, its per-path pieces and per-unit influence values from unit-level
/// outcome-side and mediator-side values.
struct Combined {
    theta: f64,
    components: Vec<PathComponent>,
    influence: Vec<f64>,
}

fn combine(paths: &[MediatorPath], phi: &[Vec<f64>], lambda: &[Vec<f64>], weights: Option<&[f64]>) -> Combined {
    let n = phi.first().map_or(0, Vec::len);
    let mut components = Vec::with_capacity(paths.len());
    let mut influence = alloc::vec![0.0; n];
    let mut theta = 0.0;
    for (i, path) in paths.iter().enumerate() {
        let ph = mean(&phi[i], weights);
        let la = mean(&lambda[i], weights);
        theta += ph * la;
        for u in 0..n {
            influence[u] += (phi[i][u] - ph) * la + (lambda[i][u] - la) * ph;
        }
        components.push(PathComponent { path: path.values.clone(), phi: ph, lambda: la });
    }
    Combined { theta, components, influence }
}

fn standard_error(influence: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    let se = sqrt(variance(influence, weights) / influence.len() as f64);
    if se.is_finite() {
        Ok(se)
    } else {
        Err(Error::DegenerateVariance)
    }
}

fn effect(estimate: f64, influence: &[f64], weights: Option<&[f64]>) -> Result<Effect> {
    let se = standard_error(influence, weights)?;
    Ok(Effect { estimate, se, ci: (estimate - Z_975 * se, estimate + Z_975 * se) })
}

/// One-step estimator: `φ̂(m̄)` and `λ̂(m̄)` are means of `D_{Z,1}` and
/// `D_{M,1}`, `θ̂ = Σ φ̂ λ̂`, and the standard error comes from the
/// efficient influence function with plug-in means.
pub fn estimate_theta(dataset: &PanelDataset, pair: &PolicyPair, config: &EstimatorConfig) -> Result<EstimateReport> {
    let prep = prepare(dataset, config)?;
    let values = run_pair(dataset, pair, config, &prep, PseudoOutcome::DoublyRobust)?;
    let weights = dataset.weights();
    let c = combine(&prep.paths, &values.phi, &values.lambda, weights);
    let se = standard_error(&c.influence, weights)?;
    Ok(EstimateReport {
        theta: c.theta,
        se,
        ci: (c.theta - Z_975 * se, c.theta + Z_975 * se),
        influence_mean: mean(&c.influence, weights),
        components: c.components,
        diagnostics: values.diagnostics,
        influence: c.influence,
    })
}

/// Pure g-computation: regressions target earlier predictions rather than
/// D-functions, and `θ̂ = Σ mean(Q'_{Z,1}) · mean(Q*_{M,1})`.
pub fn plug_in_estimate(dataset: &PanelDataset, pair: &PolicyPair, config: &EstimatorConfig) -> Result<PointEstimate> {
    let prep = prepare(dataset, config)?;
    let values = run_pair(dataset, pair, config, &prep, PseudoOutcome::Plugin)?;
    let c = combine(&prep.paths, &values.phi, &values.lambda, dataset.weights());
    Ok(PointEstimate { theta: c.theta, components: c.components })
}

/// Weighting estimator: `φ̂(m̄) = mean(C'_{1,τ} H_{1,τ} Y)` and
/// `λ̂(m̄) = mean(C*_{1,τ} 1{M̄ = m̄})`.
pub fn ipw_estimate(dataset: &PanelDataset, paths: &[MediatorPath], ratios: &DensityRatioTable) -> Result<PointEstimate> {
    if paths.is_empty() {
        return Err(Error::NoUsablePaths);
    }
    let n = dataset.n();
    let tau = dataset.tau();
    let y = dataset.outcome();
    let weights = dataset.weights();
    let mut components = Vec::with_capacity(paths.len());
    let mut theta = 0.0;
    for path in paths {
        let (h, _) = ratios.mediator_products(path);
        let phi_units: Vec<f64> = (0..n)
            .map(|u| {
                let w = ratios.c_prime.get(1, tau, u) * h.get(1, tau, u);
                if w == 0.0 {
                    0.0
                } else {
                    w * y[u]
                }
            })
            .collect();
        let lambda_units: Vec<f64> = (0..n)
            .map(|u| {
                let on_path = (1..=tau).all(|t| dataset.mediator(t)[u] == path.at(t));
                if on_path {
                    ratios.c_star.get(1, tau, u)
                } else {
                    0.0
                }
            })
            .collect();
        let phi = mean(&phi_units, weights);
        let lambda = mean(&lambda_units, weights);
        theta += phi * lambda;
        components.push(PathComponent { path: path.values.clone(), phi, lambda });
    }
    Ok(PointEstimate { theta, components })
}

impl EffectDecomposition {
    /// Assembles the decomposition from the three parameters and their
    /// per-unit influence values: `DE = θ(d',d*) − θ(d*,d*)`,
    /// `IE = θ(d',d') − θ(d',d*)`, `TE = DE + IE`. Contrast standard errors
    /// use differences of influence values.
    #[allow(clippy::too_many_arguments)]
    pub fn from_components(
        theta_prime_prime: f64,
        theta_prime_star: f64,
        theta_star_star: f64,
        influence_prime_prime: &[f64],
        influence_prime_star: &[f64],
        influence_star_star: &[f64],
        weights: Option<&[f64]>,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let direct_est = theta_prime_star - theta_star_star;
        let indirect_est = theta_prime_prime - theta_prime_star;
        let influence_direct: Vec<f64> =
            influence_prime_star.iter().zip(influence_star_star).map(|(a, b)| a - b).collect();
        let influence_indirect: Vec<f64> =
            influence_prime_prime.iter().zip(influence_prime_star).map(|(a, b)| a - b).collect();
        let influence_total: Vec<f64> =
            influence_direct.iter().zip(&influence_indirect).map(|(a, b)| a + b).collect();
        Ok(EffectDecomposition {
            total: effect(direct_est + indirect_est, &influence_total, weights)?,
            direct: effect(direct_est, &influence_direct, weights)?,
            indirect: effect(indirect_est, &influence_indirect, weights)?,
            theta_prime_prime,
            theta_prime_star,
            theta_star_star,
            diagnostics,
            influence_total,
            influence_direct,
            influence_indirect,
        })
    }
}

/// Total, direct and indirect effects of `d'` versus `d*` from one set of
/// shared nuisances and two regression passes: `(d', d*)` yields `φ_{d'}`
/// and `λ_{d*}`, `(d*, d')` yields `φ_{d*}` and `λ_{d'}`.
pub fn decompose_effects(
    dataset: &PanelDataset,
    d_prime: &PolicySpec,
    d_star: &PolicySpec,
    config: &EstimatorConfig,
) -> Result<EffectDecomposition> {
    let prep = prepare(dataset, config)?;
    let forward = PolicyPair { d_prime: d_prime.clone(), d_star: d_star.clone() };
    let reverse = PolicyPair { d_prime: d_star.clone(), d_star: d_prime.clone() };
    let a = run_pair(dataset, &forward, config, &prep, PseudoOutcome::DoublyRobust)?;
    let b = if d_prime == d_star {
        None
    } else {
        Some(run_pair(dataset, &reverse, config, &prep, PseudoOutcome::DoublyRobust)?)
    };
    let (phi_star, lambda_prime) = match &b {
        Some(b) => (&b.phi, &b.lambda),
        None => (&a.phi, &a.lambda),
    };
    let w = dataset.weights();
    let pp = combine(&prep.paths, &a.phi, lambda_prime, w);
    let ps = combine(&prep.paths, &a.phi, &a.lambda, w);
    let ss = combine(&prep.paths, phi_star, &a.lambda, w);
    let mut diagnostics = a.diagnostics;
    if let Some(b) = &b {
        diagnostics.positivity_violations += b.diagnostics.positivity_violations;
        diagnostics.truncated_weights += b.diagnostics.truncated_weights;
        diagnostics.subset_fallbacks += b.diagnostics.subset_fallbacks;
    }
    EffectDecomposition::from_components(
        pp.theta,
        ps.theta,
        ss.theta,
        &pp.influence,
        &ps.influence,
        &ss.influence,
        w,
        diagnostics,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_arithmetic_is_exact() {
        let zeros = [0.0; 4];
        let d = EffectDecomposition::from_components(0.559, 0.476, 0.5, &zeros, &zeros, &zeros, None, Diagnostics::default())
            .unwrap();
        assert!((d.direct.estimate + 0.024).abs() < 1e-12);
        assert!((d.indirect.estimate - 0.083).abs() < 1e-12);
        assert!((d.total.estimate - 0.059).abs() < 1e-12);
        assert_eq!(d.direct.estimate + d.indirect.estimate - d.total.estimate, 0.0);
    }
}
