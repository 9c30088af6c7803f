//! Path-independent nuisances and the per-path backward regressions.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::dfun::DContext;
use crate::crossfit::fit_parts;
use crate::learners::{EnsembleSpec, TargetKind};
use crate::panel::{Design, MediatorPath, PanelDataset, Position, RoleKind, Splitting, VariableRole};
use crate::policy::{
    estimate_censoring, estimate_mediator_probs, estimate_treatment_pmf, CumulativeProducts, DensityRatioTable,
    RatioInputs,
};
use crate::rng::derive_seed;
use crate::Result;

/// Below this many units on the path, `Q_{L,t}` is fitted on everyone with
/// mediator indicators as features instead of on the path subsample.
const MIN_PATH_SUBSAMPLE: usize = 30;

const TAG_TREATMENT: u64 = 1;
const TAG_CENSOR: u64 = 2;
const TAG_MEDIATOR: u64 = 3;
const TAG_QL: u64 = 4;
const TAG_QZ: u64 = 5;
const TAG_QM: u64 = 6;

/// Models that do not depend on the mediator path.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedNuisance {
    /// `[t - 1][unit]` pmf over the treatment support.
    pub treatment_pmf: Vec<Vec<Vec<f64>>>,
    pub censoring: Vec<Option<Vec<f64>>>,
    pub mediator_probs: Vec<Vec<f64>>,
}

impl SharedNuisance {
    pub fn ratio_inputs(&self) -> RatioInputs<'_> {
        RatioInputs {
            treatment_pmf: &self.treatment_pmf,
            censoring: &self.censoring,
            mediator_probs: &self.mediator_probs,
        }
    }
}

pub fn fit_shared(
    dataset: &PanelDataset,
    learners: &EnsembleSpec,
    splitting: &Splitting,
    seed: u64,
) -> Result<SharedNuisance> {
    let tau = dataset.tau();
    let mut treatment_pmf = Vec::with_capacity(tau);
    let mut censoring = Vec::with_capacity(tau);
    let mut mediator_probs = Vec::with_capacity(tau);
    for t in 1..=tau {
        let tk = t as u64;
        treatment_pmf.push(estimate_treatment_pmf(dataset, t, learners, splitting, derive_seed(seed, &[TAG_TREATMENT, tk]))?);
        censoring.push(estimate_censoring(dataset, t, learners, splitting, derive_seed(seed, &[TAG_CENSOR, tk]))?);
        mediator_probs.push(estimate_mediator_probs(dataset, t, learners, splitting, derive_seed(seed, &[TAG_MEDIATOR, tk]))?);
    }
    Ok(SharedNuisance { treatment_pmf, censoring, mediator_probs })
}

/// What the regressions at `t` are fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoOutcome {
    /// Doubly robust D-functions of the later timepoints.
    DoublyRobust,
    /// Later regression predictions (pure g-computation).
    Plugin,
}

/// Sequential-regression predictions for one mediator path. Tables are
/// indexed `[s - 1][unit]` for `s = 1..=tau + 1`; entry `tau + 1` holds the
/// initial values (`Y` for the outcome side, 1 for the mediator side).
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceTable {
    pub path: MediatorPath,
    /// `Q_{L,s}(m_s, H_{M,s})`.
    pub q_l: Vec<Vec<f64>>,
    /// `Q_{Z,s}` at the `d'`-shifted treatment.
    pub q_z_shifted: Vec<Vec<f64>>,
    /// `Q_{Z,s}` at the recorded treatment.
    pub q_z_observed: Vec<Vec<f64>>,
    /// `Q_{M,s}` at the `d*`-shifted treatment.
    pub q_m_shifted: Vec<Vec<f64>>,
    pub q_m_observed: Vec<Vec<f64>>,
    /// Split part whose models produced each unit's predictions.
    pub part: Vec<usize>,
    pub subset_fallbacks: usize,
}

/// Inputs shared by all per-path regressions of one policy pair.
pub struct RegressionSetup<'a> {
    pub dataset: &'a PanelDataset,
    /// `[t - 1][unit]` values of `d'_t` and `d*_t` on observed data.
    pub shifted_prime: &'a [Vec<f64>],
    pub shifted_star: &'a [Vec<f64>],
    pub ratios: &'a DensityRatioTable,
    pub learners: &'a EnsembleSpec,
    pub splitting: &'a Splitting,
    pub seed: u64,
}

/// Fits `Q_{L,t}`, `Q_{Z,t}`, `Q_{M,t}` for `t = tau, …, 1` on one path.
/// With [`PseudoOutcome::DoublyRobust`] each regression targets the
/// D-function of the step after it, built from `h` (the path's truncated
/// mediator products) and the ratio table.
pub fn sequential_regressions(
    setup: &RegressionSetup<'_>,
    path: &MediatorPath,
    path_index: usize,
    h: &CumulativeProducts,
    mode: PseudoOutcome,
) -> Result<NuisanceTable> {
    let s = setup;
    let dataset = s.dataset;
    let n = dataset.n();
    let tau = dataset.tau();
    let weights = dataset.weights();
    let all: Vec<usize> = (0..n).collect();

    let mut table = NuisanceTable {
        path: path.clone(),
        q_l: alloc::vec![alloc::vec![0.0; n]; tau + 1],
        q_z_shifted: alloc::vec![alloc::vec![0.0; n]; tau + 1],
        q_z_observed: alloc::vec![alloc::vec![0.0; n]; tau + 1],
        q_m_shifted: alloc::vec![alloc::vec![0.0; n]; tau + 1],
        q_m_observed: alloc::vec![alloc::vec![0.0; n]; tau + 1],
        part: (0..n).map(|u| s.splitting.part_of(u)).collect(),
        subset_fallbacks: 0,
    };
    table.q_z_shifted[tau] = dataset.outcome().to_vec();
    table.q_z_observed[tau] = dataset.outcome().to_vec();
    table.q_m_shifted[tau] = alloc::vec![1.0; n];
    table.q_m_observed[tau] = alloc::vec![1.0; n];

    let ctx = DContext::new(dataset, s.ratios, h, path);
    for t in (1..=tau).rev() {
        let key = |tag: u64| derive_seed(s.seed, &[tag, path_index as u64, t as u64]);
        let observed: Vec<bool> = (0..n).map(|u| dataset.observed_through(u, t)).collect();
        let mediator = dataset.mediator(t);
        let m_t = path.at(t);

        // Q_L: regress the next pseudo-outcome on H_{M,t} among units with M_t = m_t.
        let target_l: Vec<f64> = match mode {
            PseudoOutcome::DoublyRobust => (0..n).map(|u| ctx.d_z(&table, t + 1, u)).collect(),
            PseudoOutcome::Plugin => table.q_z_shifted[t].clone(),
        };
        let on_path: Vec<bool> = (0..n).map(|u| observed[u] && mediator[u] == m_t).collect();
        let on_path_count = (0..n).filter(|&u| on_path[u] && weights.is_none_or(|w| w[u] > 0.0)).count();
        if on_path_count >= MIN_PATH_SUBSAMPLE {
            let design = Design::before(dataset, VariableRole::new(RoleKind::Mediator, t).position());
            let x = design.matrix(dataset, &all, &[]);
            let models = fit_parts(s.splitting, s.learners, &x, &target_l, &on_path, weights, TargetKind::Mean, key(TAG_QL), t)?;
            table.q_l[t - 1] = (0..n).map(|u| models.for_unit(u).predict(x.row(u))).collect();
        } else {
            table.subset_fallbacks += 1;
            let design = Design::before(dataset, Position { time: t + 1, rank: 0 });
            let x = design.matrix(dataset, &all, &[]);
            let models = fit_parts(s.splitting, s.learners, &x, &target_l, &observed, weights, TargetKind::Mean, key(TAG_QL), t)?;
            let at_path = alloc::vec![m_t; n];
            let xp = design.matrix(dataset, &all, &[(dataset.mediator_index(t), &at_path)]);
            table.q_l[t - 1] = (0..n).map(|u| models.for_unit(u).predict(xp.row(u))).collect();
        }

        // Q_Z and Q_M share the design (A_t, H_{A,t}).
        let design = Design::before(dataset, VariableRole::new(RoleKind::CensorIndicator, t).position());
        let a_idx = dataset.treatment_index(t);
        let x = design.matrix(dataset, &all, &[]);
        let x_prime = design.matrix(dataset, &all, &[(a_idx, &s.shifted_prime[t - 1])]);
        let x_star = design.matrix(dataset, &all, &[(a_idx, &s.shifted_star[t - 1])]);

        let target_z: Vec<f64> = match mode {
            PseudoOutcome::DoublyRobust => (0..n).map(|u| ctx.d_l(&table, t, u)).collect(),
            PseudoOutcome::Plugin => table.q_l[t - 1].clone(),
        };
        let models = fit_parts(s.splitting, s.learners, &x, &target_z, &observed, weights, TargetKind::Mean, key(TAG_QZ), t)?;
        table.q_z_shifted[t - 1] = (0..n).map(|u| models.for_unit(u).predict(x_prime.row(u))).collect();
        table.q_z_observed[t - 1] = (0..n).map(|u| models.for_unit(u).predict(x.row(u))).collect();

        let next_m: Vec<f64> = match mode {
            PseudoOutcome::DoublyRobust => (0..n).map(|u| ctx.d_m(&table, t + 1, u)).collect(),
            PseudoOutcome::Plugin => table.q_m_shifted[t].clone(),
        };
        let target_m: Vec<f64> = (0..n).map(|u| if mediator[u] == m_t { next_m[u] } else { 0.0 }).collect();
        let models = fit_parts(s.splitting, s.learners, &x, &target_m, &observed, weights, TargetKind::Mean, key(TAG_QM), t)?;
        table.q_m_shifted[t - 1] = (0..n).map(|u| models.for_unit(u).predict(x_star.row(u)).clamp(0.0, 1.0)).collect();
        table.q_m_observed[t - 1] = (0..n).map(|u| models.for_unit(u).predict(x.row(u)).clamp(0.0, 1.0)).collect();
    }
    Ok(table)
}
