//! Two-period simulation design with an intermediate confounder, a binary
//! mediator and treatment/mediator effect signs `U` and `V` on the outcome.

use alloc::format;
use alloc::vec;

use super::{NodeLaw, NodeSpec, ScmSpec};
use crate::panel::RoleKind::*;
use crate::policy::{PolicyPair, PolicySpec};
use crate::{Error, Result};

fn bern(name: &str, kind: crate::panel::RoleKind, time: usize, linear: &str) -> NodeSpec {
    NodeSpec::new(name, kind, time, NodeLaw::Bernoulli { formula: format!("1/3 + expit(0.5*({linear}))/3") })
}

fn gauss(name: &str, kind: crate::panel::RoleKind, time: usize, linear: &str) -> NodeSpec {
    NodeSpec::new(name, kind, time, NodeLaw::Gaussian { formula: format!("0.5*({linear})"), sd: 1.0 })
}

/// The model with `U, V ∈ {−1, 1}`. Binary nodes have probabilities
/// `1/3 + expit(·)/3`, so they stay within `[1/3, 2/3]`.
pub fn two_period_dgp(u: f64, v: f64) -> Result<ScmSpec> {
    if !(u == 1.0 || u == -1.0) || !(v == 1.0 || v == -1.0) {
        return Err(Error::InvalidParameter(format!("U and V must be -1 or 1, got U = {u}, V = {v}")));
    }
    Ok(ScmSpec {
        tau: 2,
        nodes: vec![
            NodeSpec::new("L1", BaselineCovariate, 1, NodeLaw::Gaussian { formula: "0".into(), sd: 1.0 }),
            bern("A1", Treatment, 1, "L1"),
            gauss("Z1", IntermediateConfounder, 1, "-L1 + A1 - 0.5"),
            bern("M1", Mediator, 1, "L1 - A1 - Z1 + 0.5"),
            gauss("L2", TimeCovariate, 2, "-L1 + A1 + Z1 - M1"),
            bern("A2", Treatment, 2, "L1 - A1 - Z1 + M1 + L2"),
            gauss("Z2", IntermediateConfounder, 2, "-L1 + A1 + Z1 - M1 - L2 + A2 - 0.5"),
            bern("M2", Mediator, 2, "L1 - A1 - Z1 + M1 + L2 - A2 - Z2 + 0.5"),
            gauss("Y", Outcome, 3, &format!("-L1 - A1 - Z1 - M1 + L2 + ({u})*A2 - Z2 + ({v})*M2")),
        ],
    })
}

/// `d'` sets the first treatment to 1 and leaves the second natural; `d*`
/// is the natural course.
pub fn two_period_policies() -> PolicyPair {
    PolicyPair { d_prime: PolicySpec::set_at(1, 1.0), d_star: PolicySpec::Identity }
}

/// Published closed-form value `(U − 1.25 + V/2) / 2`.
pub fn closed_form_truth(u: f64, v: f64) -> f64 {
    (u - 1.25 + v / 2.0) / 2.0
}
