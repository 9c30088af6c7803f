//! Treatment policies and the density ratios they induce.
//!
//! A policy maps the natural value of treatment at time `t` and the history
//! before it to the treatment actually assigned. On observed data the
//! recorded treatment plays the natural-value role. For discrete treatments
//! the policy-shifted pmf is the pushforward of the natural pmf.

mod pmf;
mod ratios;

pub use pmf::{estimate_censoring, estimate_mediator_probs, estimate_treatment_pmf, normalize_pmf};
pub use ratios::{density_ratios, truncate_weights, CumulativeProducts, DensityRatioTable, RatioInputs};

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::panel::{history, HistoryView, PanelDataset, RoleKind, VariableRole};
use crate::{Error, Result};

/// A deterministic longitudinal treatment policy.
pub trait TreatmentPolicy: Sync + Send {
    /// Treatment assigned at `time` given the natural value and the history
    /// preceding treatment at `time`.
    fn decide(&self, time: usize, natural: f64, history: &HistoryView<'_>) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Ge => lhs >= rhs,
            Comparison::Eq => lhs == rhs,
            Comparison::Ne => lhs != rhs,
        }
    }
}

/// `history[column] <op> value`. A column absent from the history makes the
/// predicate false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub column: String,
    pub op: Comparison,
    pub value: f64,
}

/// One row of a rule table. All present conditions must hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    /// Timepoints the rule applies to; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<usize>>,
    /// Natural treatment level the rule applies to; any when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub when: Vec<Predicate>,
    pub to: f64,
}

impl Rule {
    fn matches(&self, time: usize, natural: f64, history: &HistoryView<'_>) -> bool {
        self.times.as_ref().is_none_or(|ts| ts.contains(&time))
            && self.from.is_none_or(|f| f == natural)
            && self
                .when
                .iter()
                .all(|p| history.get(&p.column).is_some_and(|v| p.op.holds(v, p.value)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    /// Leaves the natural treatment unchanged.
    Identity,
    /// Assigns `fallback` on the first timepoint at which the natural
    /// treatment reaches `level`, i.e. when `a_t == level` and every earlier
    /// treatment in the history is below `level`; otherwise unchanged.
    DelayFirstLevel { level: f64, fallback: f64 },
    /// First matching rule wins; no match leaves the treatment unchanged.
    Rules(Vec<Rule>),
}

impl PolicySpec {
    /// Sets treatment to `value` at `time` only.
    pub fn set_at(time: usize, value: f64) -> Self {
        PolicySpec::Rules(alloc::vec![Rule { times: Some(alloc::vec![time]), from: None, when: Vec::new(), to: value }])
    }

    /// Sets treatment to `value` at every timepoint.
    pub fn constant(value: f64) -> Self {
        PolicySpec::Rules(alloc::vec![Rule { times: None, from: None, when: Vec::new(), to: value }])
    }
}

impl TreatmentPolicy for PolicySpec {
    fn decide(&self, time: usize, natural: f64, history: &HistoryView<'_>) -> f64 {
        match self {
            PolicySpec::Identity => natural,
            PolicySpec::DelayFirstLevel { level, fallback } => {
                if natural == *level && history.treatments().all(|a| a < *level) {
                    *fallback
                } else {
                    natural
                }
            }
            PolicySpec::Rules(rules) => rules
                .iter()
                .find(|r| r.matches(time, natural, history))
                .map_or(natural, |r| r.to),
        }
    }
}

/// The contrast's two policies: `d_prime` drives treatment in the outcome
/// world, `d_star` the world whose mediator distribution is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyPair {
    pub d_prime: PolicySpec,
    pub d_star: PolicySpec,
}

/// `d_t(A_t, H_{A,t})` for every unit, with the recorded treatment as the
/// natural value.
pub fn apply_policy(policy: &dyn TreatmentPolicy, dataset: &PanelDataset, time: usize) -> Result<Vec<f64>> {
    let anchor = VariableRole::new(RoleKind::Treatment, time);
    let support = dataset.treatment_support(time);
    let natural = dataset.treatment(time);
    (0..dataset.n())
        .map(|u| {
            let h = history(dataset, u, anchor)?;
            let v = policy.decide(time, natural[u], &h);
            if support.contains(&v) {
                Ok(v)
            } else {
                Err(Error::PolicyOutsideSupport { time, value: v })
            }
        })
        .collect()
}

/// Pushforward of `pmf` (over `support`) through `d_t(·, h)`.
pub fn shifted_pmf(
    policy: &dyn TreatmentPolicy,
    time: usize,
    support: &[f64],
    pmf: &[f64],
    history: &HistoryView<'_>,
) -> Result<Vec<f64>> {
    let mut out = alloc::vec![0.0; support.len()];
    for (a0, p) in support.iter().zip(pmf) {
        let a = policy.decide(time, *a0, history);
        let idx = support
            .iter()
            .position(|s| *s == a)
            .ok_or(Error::PolicyOutsideSupport { time, value: a })?;
        out[idx] += p;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelBuilder;
    use crate::panel::RoleKind::*;

    fn four_period(a: [f64; 4]) -> PanelDataset {
        let mut b = PanelBuilder::new(4).observed(BaselineCovariate, 1, "L1", &[0.0]);
        for t in 1..=4 {
            b = b
                .observed(Treatment, t, &alloc::format!("A{t}"), &[a[t - 1]])
                .observed(Mediator, t, &alloc::format!("M{t}"), &[0.0]);
        }
        b.observed(Outcome, 5, "Y", &[0.0])
            .treatment_support(&[0.0, 1.0, 2.0])
            .mediator_support(&[0.0, 1.0])
            .build()
            .unwrap()
    }

    #[test]
    fn delay_downgrades_only_the_first_top_level() {
        let d = four_period([0.0, 1.0, 2.0, 2.0]);
        let p = PolicySpec::DelayFirstLevel { level: 2.0, fallback: 1.0 };
        let out: Vec<f64> = (1..=4).map(|t| apply_policy(&p, &d, t).unwrap()[0]).collect();
        assert_eq!(out, [0.0, 1.0, 1.0, 2.0]);

        let d = four_period([0.0, 1.0, 1.0, 0.0]);
        let out: Vec<f64> = (1..=4).map(|t| apply_policy(&p, &d, t).unwrap()[0]).collect();
        assert_eq!(out, [0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_returns_observed_and_bad_outputs_are_rejected() {
        let d = four_period([0.0, 1.0, 2.0, 2.0]);
        assert_eq!(apply_policy(&PolicySpec::Identity, &d, 3).unwrap(), [2.0]);
        let err = apply_policy(&PolicySpec::constant(5.0), &d, 1).unwrap_err();
        assert_eq!(err, Error::PolicyOutsideSupport { time: 1, value: 5.0 });
    }

    #[test]
    fn pushforward_moves_mass() {
        let d = four_period([0.0, 1.0, 2.0, 2.0]);
        let h = history(&d, 0, VariableRole::new(Treatment, 1)).unwrap();
        let support = [0.0, 1.0, 2.0];
        let g = [0.5, 0.3, 0.2];
        let delay = PolicySpec::DelayFirstLevel { level: 2.0, fallback: 1.0 };
        assert_eq!(shifted_pmf(&delay, 1, &support, &g, &h).unwrap(), [0.5, 0.5, 0.0]);
        assert_eq!(shifted_pmf(&PolicySpec::Identity, 1, &support, &g, &h).unwrap(), g);
        let point = shifted_pmf(&PolicySpec::constant(1.0), 1, &support, &g, &h).unwrap();
        assert_eq!(point, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn rules_respect_time_level_and_predicates() {
        let d = four_period([0.0, 1.0, 2.0, 2.0]);
        let p = PolicySpec::Rules(alloc::vec![
            Rule { times: Some(alloc::vec![3]), from: Some(2.0), when: alloc::vec![Predicate { column: "A2".into(), op: Comparison::Eq, value: 1.0 }], to: 0.0 },
            Rule { times: None, from: Some(0.0), when: Vec::new(), to: 1.0 },
        ]);
        let out: Vec<f64> = (1..=4).map(|t| apply_policy(&p, &d, t).unwrap()[0]).collect();
        assert_eq!(out, [1.0, 1.0, 0.0, 2.0]);
    }
}
