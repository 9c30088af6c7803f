//! Cross-fitted conditional pmfs for treatment, mediator and censoring.

use alloc::vec::Vec;

use crate::crossfit::fit_parts;
use crate::learners::{EnsembleSpec, TargetKind};
use crate::math::PROB_FLOOR;
use crate::panel::{Design, PanelDataset, RoleKind, Splitting, VariableRole};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Rescales nonnegative values to sum to one (uniform if all are zero).
pub fn normalize_pmf(raw: &mut [f64]) {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter_mut().for_each(|v| *v /= total);
    } else {
        let k = raw.len() as f64;
        raw.iter_mut().for_each(|v| *v = 1.0 / k);
    }
}

#[allow(clippy::too_many_arguments)]
fn categorical_pmf(
    dataset: &PanelDataset,
    design: &Design,
    values: &[f64],
    support: &[f64],
    eligible: &[bool],
    learner: &EnsembleSpec,
    splitting: &Splitting,
    seed: u64,
    time: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = dataset.n();
    if support.len() == 1 {
        return Ok(alloc::vec![alloc::vec![1.0]; n]);
    }
    let units: Vec<usize> = (0..n).collect();
    let x = design.matrix(dataset, &units, &[]);
    let modeled: Vec<usize> = if support.len() == 2 { alloc::vec![1] } else { (0..support.len()).collect() };
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(modeled.len());
    for &k in &modeled {
        let y: Vec<f64> = values.iter().map(|v| if *v == support[k] { 1.0 } else { 0.0 }).collect();
        let models = fit_parts(
            splitting,
            learner,
            &x,
            &y,
            eligible,
            dataset.weights(),
            TargetKind::Probability,
            derive_seed(seed, &[k as u64]),
            time,
        )?;
        columns.push((0..n).map(|u| models.for_unit(u).predict(x.row(u))).collect());
    }
    Ok((0..n)
        .map(|u| {
            if support.len() == 2 {
                let p = columns[0][u];
                alloc::vec![1.0 - p, p]
            } else {
                let mut pmf: Vec<f64> = columns.iter().map(|c| c[u]).collect();
                normalize_pmf(&mut pmf);
                pmf
            }
        })
        .collect())
}

/// `ĝ_t(· | H_{A,t})` over the treatment support for every unit, fitted on
/// units at risk at `t`.
pub fn estimate_treatment_pmf(
    dataset: &PanelDataset,
    time: usize,
    learner: &EnsembleSpec,
    splitting: &Splitting,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let eligible: Vec<bool> = (0..dataset.n()).map(|u| dataset.at_risk(u, time)).collect();
    let support = dataset.treatment_support(time);
    let values = dataset.treatment(time);
    let weights = dataset.weights();
    for &level in support {
        let present = (0..dataset.n())
            .any(|u| eligible[u] && values[u] == level && weights.is_none_or(|w| w[u] > 0.0));
        if !present {
            return Err(Error::MissingTreatmentLevel { time, level });
        }
    }
    let design = Design::before(dataset, VariableRole::new(RoleKind::Treatment, time).position());
    categorical_pmf(dataset, &design, values, support, &eligible, learner, splitting, seed, time)
}

/// `ĝ_{M,t}(M_t | H_{M,t})` at the recorded mediator value, fitted on units
/// observed through `t`. Zero for units whose `M_t` is unobserved.
pub fn estimate_mediator_probs(
    dataset: &PanelDataset,
    time: usize,
    learner: &EnsembleSpec,
    splitting: &Splitting,
    seed: u64,
) -> Result<Vec<f64>> {
    let eligible: Vec<bool> = (0..dataset.n()).map(|u| dataset.observed_through(u, time)).collect();
    let support = dataset.mediator_support(time);
    let values = dataset.mediator(time);
    let design = Design::before(dataset, VariableRole::new(RoleKind::Mediator, time).position());
    let pmf = categorical_pmf(dataset, &design, values, support, &eligible, learner, splitting, seed, time)?;
    Ok((0..dataset.n())
        .map(|u| {
            if !eligible[u] {
                return 0.0;
            }
            let k = support.iter().position(|s| *s == values[u]).unwrap_or(0);
            pmf[u][k]
        })
        .collect())
}

/// `P̂(observed through t | A_t, H_{A,t})` for units at risk at `t`, or
/// `None` when no at-risk unit is censored at `t`.
pub fn estimate_censoring(
    dataset: &PanelDataset,
    time: usize,
    learner: &EnsembleSpec,
    splitting: &Splitting,
    seed: u64,
) -> Result<Option<Vec<f64>>> {
    let n = dataset.n();
    let eligible: Vec<bool> = (0..n).map(|u| dataset.at_risk(u, time)).collect();
    if !(0..n).any(|u| eligible[u] && !dataset.observed_through(u, time)) {
        return Ok(None);
    }
    let y: Vec<f64> = (0..n).map(|u| if dataset.observed_through(u, time) { 1.0 } else { 0.0 }).collect();
    let design = Design::before(dataset, VariableRole::new(RoleKind::CensorIndicator, time).position());
    let units: Vec<usize> = (0..n).collect();
    let x = design.matrix(dataset, &units, &[]);
    let models = fit_parts(splitting, learner, &x, &y, &eligible, dataset.weights(), TargetKind::Probability, seed, time)?;
    Ok(Some(
        (0..n)
            .map(|u| if eligible[u] { models.for_unit(u).predict(x.row(u)).max(PROB_FLOOR) } else { 1.0 })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_vs_rest_outputs_are_renormalized() {
        let mut p = [0.2, 0.2, 0.2];
        normalize_pmf(&mut p);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
