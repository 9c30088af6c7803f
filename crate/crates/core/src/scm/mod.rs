//! Declarative structural causal models: forward simulation, counterfactual
//! rollouts under treatment policies with shared exogenous noise, a Monte
//! Carlo oracle for the interventional parameter, and a replicate
//! benchmark harness.

mod bench;
mod expr;
mod oracle;
mod two_period;

pub use bench::{benchmark, benchmark_with, BenchmarkReport, BenchmarkSummary, ReplicateOutcome};
pub use expr::Expr;
pub use oracle::{oracle_samples, oracle_theta, phase_noise, Conditioning, OracleConfig, OracleEstimate, OracleSamples};
pub use two_period::{closed_form_truth, two_period_dgp, two_period_policies};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{cos, ln, sqrt};
use crate::panel::{ColumnKey, HistoryView, PanelBuilder, PanelDataset, RoleKind, VariableRole};
use crate::par::try_map_indexed;
use crate::policy::{PolicySpec, TreatmentPolicy};
use crate::rng::NoiseStream;
use crate::{Error, Result};

/// Distribution of a node given its parents. Every `formula` is an
/// [`Expr`] over the names of earlier nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "noise", rename_all = "snake_case")]
pub enum NodeLaw {
    /// The formula's value, with no noise.
    Deterministic { formula: String },
    /// Normal with mean `formula` and standard deviation `sd`.
    Gaussian { formula: String, sd: f64 },
    /// Takes 1 with probability `formula`, else 0.
    Bernoulli { formula: String },
    /// Takes `levels[k]` with probability proportional to `weights[k]`.
    Categorical { levels: Vec<f64>, weights: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub kind: RoleKind,
    pub time: usize,
    #[serde(flatten)]
    pub law: NodeLaw,
}

impl NodeSpec {
    pub fn new(name: &str, kind: RoleKind, time: usize, law: NodeLaw) -> Self {
        NodeSpec { name: name.into(), kind, time, law }
    }
}

/// Serializable model description. Nodes are listed in causal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub tau: usize,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone)]
enum Law {
    Deterministic(Expr),
    Gaussian(Expr, f64),
    Bernoulli(Expr),
    Categorical(Vec<f64>, Vec<Expr>),
}

/// A validated model with compiled formulas.
#[derive(Debug, Clone)]
pub struct Scm {
    spec: ScmSpec,
    keys: Vec<ColumnKey>,
    laws: Vec<Law>,
    treatment: Vec<usize>,
    mediator: Vec<usize>,
    outcome: usize,
}

impl Scm {
    /// Validates the node order (`L_t ≺ A_t ≺ Z_t ≺ M_t ≺ L_{t+1}`, outcome
    /// last), one treatment and one discrete mediator per timepoint, and
    /// that every formula reads only earlier nodes.
    pub fn new(spec: ScmSpec) -> Result<Self> {
        let tau = spec.tau;
        if tau == 0 {
            return Err(Error::Schema("model tau must be at least 1".into()));
        }
        let mut keys: Vec<ColumnKey> = Vec::with_capacity(spec.nodes.len());
        let mut laws = Vec::with_capacity(spec.nodes.len());
        let mut treatment = alloc::vec![usize::MAX; tau];
        let mut mediator = alloc::vec![usize::MAX; tau];
        let mut outcome = None;
        for (k, node) in spec.nodes.iter().enumerate() {
            let role = VariableRole::new(node.kind, node.time);
            let time_ok = match node.kind {
                RoleKind::BaselineCovariate => node.time == 1,
                RoleKind::TimeCovariate => (2..=tau).contains(&node.time),
                RoleKind::Treatment | RoleKind::IntermediateConfounder | RoleKind::Mediator => {
                    (1..=tau).contains(&node.time)
                }
                RoleKind::Outcome => node.time == tau + 1,
                RoleKind::CensorIndicator => false,
            };
            if !time_ok {
                return Err(Error::Schema(format!(
                    "node '{}': {:?} cannot occur at time {} with tau = {tau}",
                    node.name, node.kind, node.time
                )));
            }
            if keys.iter().any(|key| key.name == node.name) {
                return Err(Error::Schema(format!("duplicate node name '{}'", node.name)));
            }
            if outcome.is_some() {
                return Err(Error::Schema(format!("node '{}' follows the outcome", node.name)));
            }
            if let Some(prev) = keys.last() {
                if role.position() < prev.role.position() {
                    return Err(Error::Schema(format!(
                        "node '{}' is out of causal order (after '{}')",
                        node.name, prev.name
                    )));
                }
            }
            let slot = match node.kind {
                RoleKind::Treatment => Some(&mut treatment[node.time - 1]),
                RoleKind::Mediator => Some(&mut mediator[node.time - 1]),
                _ => None,
            };
            if let Some(slot) = slot {
                if *slot != usize::MAX {
                    return Err(Error::Schema(format!("two {:?} nodes at time {}", node.kind, node.time)));
                }
                *slot = k;
            }
            if node.kind == RoleKind::Outcome {
                outcome = Some(k);
            }
            let resolve = |name: &str| keys.iter().position(|key| key.name == name);
            let parse = |src: &str| {
                Expr::parse(src, &resolve).map_err(|e| match e {
                    Error::Expression(m) => Error::Expression(format!("node '{}': {m}", node.name)),
                    other => other,
                })
            };
            let law = match &node.law {
                NodeLaw::Deterministic { formula } => Law::Deterministic(parse(formula)?),
                NodeLaw::Gaussian { formula, sd } => {
                    if !(sd.is_finite() && *sd >= 0.0) {
                        return Err(Error::InvalidParameter(format!("node '{}': sd must be >= 0", node.name)));
                    }
                    Law::Gaussian(parse(formula)?, *sd)
                }
                NodeLaw::Bernoulli { formula } => Law::Bernoulli(parse(formula)?),
                NodeLaw::Categorical { levels, weights } => {
                    if levels.is_empty() || levels.len() != weights.len() {
                        return Err(Error::InvalidParameter(format!(
                            "node '{}': categorical needs one weight per level",
                            node.name
                        )));
                    }
                    Law::Categorical(levels.clone(), weights.iter().map(|w| parse(w)).collect::<Result<_>>()?)
                }
            };
            if node.kind == RoleKind::Mediator && matches!(law, Law::Gaussian(..)) {
                return Err(Error::Schema(format!("mediator '{}' must be discrete", node.name)));
            }
            laws.push(law);
            keys.push(ColumnKey { role, name: node.name.clone() });
        }
        if let Some(t) = treatment.iter().position(|&i| i == usize::MAX) {
            return Err(Error::Schema(format!("no treatment node at time {}", t + 1)));
        }
        if let Some(t) = mediator.iter().position(|&i| i == usize::MAX) {
            return Err(Error::Schema(format!("no mediator node at time {}", t + 1)));
        }
        let outcome = outcome.ok_or_else(|| Error::Schema("model has no outcome node".into()))?;
        Ok(Scm { spec, keys, laws, treatment, mediator, outcome })
    }

    pub fn spec(&self) -> &ScmSpec {
        &self.spec
    }

    pub fn tau(&self) -> usize {
        self.spec.tau
    }

    pub fn node_count(&self) -> usize {
        self.laws.len()
    }

    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(|k| k.name.as_str())
    }

    pub fn treatment_node(&self, t: usize) -> usize {
        self.treatment[t - 1]
    }

    pub fn mediator_node(&self, t: usize) -> usize {
        self.mediator[t - 1]
    }

    pub fn outcome_node(&self) -> usize {
        self.outcome
    }

    fn draw(&self, k: usize, values: &[f64], noise: &NoiseStream, unit: u64) -> Result<f64> {
        let (u1, u2) = noise.uniforms(unit, k);
        let name = &self.keys[k].name;
        let finite = |v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("node '{name}' evaluated to {v}")))
            }
        };
        let probability = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(Error::NonFinite(format!("node '{name}' probability {p} outside [0, 1]")))
            }
        };
        match &self.laws[k] {
            Law::Deterministic(e) => finite(e.eval(values)),
            Law::Gaussian(e, sd) => {
                let z = sqrt(-2.0 * ln(u1)) * cos(core::f64::consts::TAU * u2);
                finite(finite(e.eval(values))? + sd * z)
            }
            Law::Bernoulli(e) => {
                let p = probability(e.eval(values))?;
                Ok(if u1 < p { 1.0 } else { 0.0 })
            }
            Law::Categorical(levels, weights) => {
                let w: Vec<f64> = weights.iter().map(|e| e.eval(values)).collect();
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::NonFinite(format!("node '{name}' has invalid category weights")));
                }
                let total: f64 = w.iter().sum();
                if total <= 0.0 {
                    return Err(Error::NonFinite(format!("node '{name}' category weights sum to zero")));
                }
                let target = u1 * total;
                let mut acc = 0.0;
                for (level, wk) in levels.iter().zip(&w) {
                    acc += wk;
                    if target < acc {
                        return Ok(*level);
                    }
                }
                Ok(levels[w.iter().rposition(|x| *x > 0.0).unwrap_or(levels.len() - 1)])
            }
        }
    }

    /// One unit's trajectory when treatment follows `policy`.
    ///
    /// At each treatment node the natural value is drawn from the intervened
    /// history and the policy is then applied to it. When `mediators` is
    /// given, mediator `t` is set to `mediators[t - 1]` and its structural
    /// function is bypassed. The same `(noise, unit)` gives the same
    /// exogenous draws in every world.
    pub fn rollout(
        &self,
        policy: &dyn TreatmentPolicy,
        noise: &NoiseStream,
        unit: u64,
        mediators: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let mut values = Vec::with_capacity(self.laws.len());
        for k in 0..self.laws.len() {
            let key = &self.keys[k];
            let t = key.role.time;
            let value = match (key.role.kind, mediators) {
                (RoleKind::Mediator, Some(m)) => m[t - 1],
                (RoleKind::Treatment, _) => {
                    let natural = self.draw(k, &values, noise, unit)?;
                    let history = HistoryView::new(unit as usize, key.role, self.keys[..k].iter().collect(), values.clone());
                    let v = policy.decide(t, natural, &history);
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!("policy returned {v} at time {t}")));
                    }
                    v
                }
                _ => self.draw(k, &values, noise, unit)?,
            };
            values.push(value);
        }
        Ok(values)
    }

    /// `n` i.i.d. units drawn in node order; unit `i` uses noise stream
    /// `(seed, i)`.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<PanelDataset> {
        if n == 0 {
            return Err(Error::EmptyData);
        }
        let noise = NoiseStream::new(seed);
        let rows = try_map_indexed(n, |u| self.rollout(&PolicySpec::Identity, &noise, u as u64, None))?;
        let mut builder = PanelBuilder::new(self.tau());
        for (k, key) in self.keys.iter().enumerate() {
            let column: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            builder = builder.observed(key.role.kind, key.role.time, &key.name, &column);
        }
        let support = (1..=self.tau())
            .map(|t| match &self.laws[self.mediator_node(t)] {
                Law::Bernoulli(_) => alloc::vec![0.0, 1.0],
                Law::Categorical(levels, _) => levels.clone(),
                _ => {
                    let mut seen: Vec<f64> = rows.iter().map(|r| r[self.mediator_node(t)]).collect();
                    seen.sort_by(f64::total_cmp);
                    seen.dedup();
                    seen
                }
            })
            .collect();
        builder.mediator_support_per_time(support).build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn det(name: &str, kind: RoleKind, time: usize, formula: &str) -> NodeSpec {
        NodeSpec::new(name, kind, time, NodeLaw::Deterministic { formula: formula.into() })
    }

    #[test]
    fn constant_model_gives_identical_units() {
        let spec = ScmSpec {
            tau: 1,
            nodes: vec![
                det("l", RoleKind::BaselineCovariate, 1, "2"),
                det("a", RoleKind::Treatment, 1, "1"),
                det("m", RoleKind::Mediator, 1, "l - a"),
                det("y", RoleKind::Outcome, 2, "l + m"),
            ],
        };
        let data = Scm::new(spec).unwrap().simulate(5, 3).unwrap();
        assert!(data.outcome().iter().all(|&y| y == 3.0));
    }

    #[test]
    fn order_and_reference_errors() {
        let backwards = ScmSpec {
            tau: 1,
            nodes: vec![
                det("a", RoleKind::Treatment, 1, "1"),
                det("l", RoleKind::BaselineCovariate, 1, "1"),
                det("m", RoleKind::Mediator, 1, "1"),
                det("y", RoleKind::Outcome, 2, "1"),
            ],
        };
        assert!(matches!(Scm::new(backwards), Err(Error::Schema(_))));
        let forward_ref = ScmSpec {
            tau: 1,
            nodes: vec![
                det("a", RoleKind::Treatment, 1, "m"),
                det("m", RoleKind::Mediator, 1, "1"),
                det("y", RoleKind::Outcome, 2, "1"),
            ],
        };
        assert!(matches!(Scm::new(forward_ref), Err(Error::Expression(_))));
        let no_mediator = ScmSpec {
            tau: 1,
            nodes: vec![det("a", RoleKind::Treatment, 1, "1"), det("y", RoleKind::Outcome, 2, "1")],
        };
        assert!(matches!(Scm::new(no_mediator), Err(Error::Schema(_))));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let spec = ScmSpec {
            tau: 1,
            nodes: vec![
                det("a", RoleKind::Treatment, 1, "1"),
                det("m", RoleKind::Mediator, 1, "1"),
                det("y", RoleKind::Outcome, 2, "log(0)"),
            ],
        };
        assert!(matches!(Scm::new(spec).unwrap().simulate(3, 1), Err(Error::NonFinite(_))));
    }
}
