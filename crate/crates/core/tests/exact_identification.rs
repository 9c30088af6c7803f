//! On a fully enumerable binary model, the plug-in, weighting and one-step
//! estimators with exact nuisances all reproduce the brute-force value of
//! every path component.

use medseq_core::engine::{estimate_theta, fit_shared, ipw_estimate, plug_in_estimate, EstimatorConfig, PathSelection, SplitMode};
use medseq_core::learners::{EnsembleSpec, LearnerSpec};
use medseq_core::panel::{enumerate_mediator_paths, PanelBuilder, PanelDataset, PathMode, RoleKind, Splitting};
use medseq_core::policy::{density_ratios, PolicyPair, PolicySpec};
use proptest::prelude::*;

/// Node order: L1 A1 Z1 M1 L2 A2 Z2 M2 Y.
const NODES: usize = 9;
const A: [usize; 2] = [1, 5];
const M: [usize; 2] = [3, 7];

/// `P(node k = 1 | earlier nodes)` is `expit(c[k][0] + Σ_j c[k][j+1] x_j)`.
#[derive(Debug, Clone)]
struct BinaryModel {
    coef: Vec<Vec<f64>>,
}

impl BinaryModel {
    fn p1(&self, k: usize, x: &[f64]) -> f64 {
        let c = &self.coef[k];
        let eta = c[0] + x[..k].iter().zip(&c[1..]).map(|(a, b)| a * b).sum::<f64>();
        1.0 / (1.0 + (-eta).exp())
    }

    fn p(&self, k: usize, x: &[f64], value: f64) -> f64 {
        let p = self.p1(k, x);
        if value == 1.0 {
            p
        } else {
            1.0 - p
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    Identity,
    /// Treatment postponed at its first occurrence.
    Delay,
    SetFirst(f64),
}

impl Rule {
    fn apply(self, t: usize, natural: f64, earlier: &[f64]) -> f64 {
        match self {
            Rule::Identity => natural,
            Rule::Delay if natural == 1.0 && earlier.iter().all(|&a| a < 1.0) => 0.0,
            Rule::Delay => natural,
            Rule::SetFirst(v) if t == 1 => v,
            Rule::SetFirst(_) => natural,
        }
    }

    fn spec(self) -> PolicySpec {
        match self {
            Rule::Identity => PolicySpec::Identity,
            Rule::Delay => PolicySpec::DelayFirstLevel { level: 1.0, fallback: 0.0 },
            Rule::SetFirst(v) => PolicySpec::set_at(1, v),
        }
    }
}

/// Brute-force `φ(m̄)`: mean outcome with treatment following `rule` and
/// mediators fixed at `path`.
fn phi(model: &BinaryModel, rule: Rule, path: [f64; 2], x: &mut Vec<f64>) -> f64 {
    let k = x.len();
    if k == NODES - 1 {
        return model.p1(k, x);
    }
    if let Some(t) = M.iter().position(|&m| m == k) {
        x.push(path[t]);
        let v = phi(model, rule, path, x);
        x.pop();
        return v;
    }
    let mut total = 0.0;
    for natural in [0.0, 1.0] {
        let w = model.p(k, x, natural);
        let value = match A.iter().position(|&a| a == k) {
            Some(t) => {
                let earlier: Vec<f64> = A[..t].iter().map(|&a| x[a]).collect();
                rule.apply(t + 1, natural, &earlier)
            }
            None => natural,
        };
        x.push(value);
        total += w * phi(model, rule, path, x);
        x.pop();
    }
    total
}

/// Brute-force `λ(m̄)`: probability of the mediator path with treatment
/// following `rule`.
fn lambda(model: &BinaryModel, rule: Rule, path: [f64; 2], x: &mut Vec<f64>) -> f64 {
    let k = x.len();
    if k == NODES - 1 {
        return 1.0;
    }
    if let Some(t) = M.iter().position(|&m| m == k) {
        let w = model.p(k, x, path[t]);
        x.push(path[t]);
        let v = w * lambda(model, rule, path, x);
        x.pop();
        return v;
    }
    let mut total = 0.0;
    for natural in [0.0, 1.0] {
        let w = model.p(k, x, natural);
        let value = match A.iter().position(|&a| a == k) {
            Some(t) => {
                let earlier: Vec<f64> = A[..t].iter().map(|&a| x[a]).collect();
                rule.apply(t + 1, natural, &earlier)
            }
            None => natural,
        };
        x.push(value);
        total += w * lambda(model, rule, path, x);
        x.pop();
    }
    total
}

/// Every configuration of the nine binary nodes as one unit weighted by its
/// probability.
fn population(model: &BinaryModel) -> PanelDataset {
    let mut cols = vec![Vec::new(); NODES];
    let mut weights = Vec::new();
    for code in 0..(1u32 << NODES) {
        let x: Vec<f64> = (0..NODES).map(|k| f64::from((code >> k) & 1)).collect();
        let w: f64 = (0..NODES).map(|k| model.p(k, &x[..k], x[k])).product();
        for k in 0..NODES {
            cols[k].push(x[k]);
        }
        weights.push(w);
    }
    PanelBuilder::new(2)
        .observed(RoleKind::BaselineCovariate, 1, "l1", &cols[0])
        .observed(RoleKind::Treatment, 1, "a1", &cols[1])
        .observed(RoleKind::IntermediateConfounder, 1, "z1", &cols[2])
        .observed(RoleKind::Mediator, 1, "m1", &cols[3])
        .observed(RoleKind::TimeCovariate, 2, "l2", &cols[4])
        .observed(RoleKind::Treatment, 2, "a2", &cols[5])
        .observed(RoleKind::IntermediateConfounder, 2, "z2", &cols[6])
        .observed(RoleKind::Mediator, 2, "m2", &cols[7])
        .observed(RoleKind::Outcome, 3, "y", &cols[8])
        .mediator_support(&[0.0, 1.0])
        .treatment_support(&[0.0, 1.0])
        .weights(weights)
        .build()
        .unwrap()
}

fn exact_config() -> EstimatorConfig {
    let mut config = EstimatorConfig::new(11);
    config.learners = EnsembleSpec::single(LearnerSpec::CellMeans);
    config.splitting = SplitMode::InSample;
    config.truncation_quantile = 1.0;
    config.paths = PathSelection { mode: PathMode::Full, cap: 16 };
    config
}

fn check(model: &BinaryModel, d_prime: Rule, d_star: Rule) {
    let data = population(model);
    let pair = PolicyPair { d_prime: d_prime.spec(), d_star: d_star.spec() };
    let config = exact_config();

    let one_step = estimate_theta(&data, &pair, &config).unwrap();
    let plug_in = plug_in_estimate(&data, &pair, &config).unwrap();
    let shared = fit_shared(&data, &config.learners, &Splitting::InSample, config.seed).unwrap();
    let ratios = density_ratios(&data, &pair, shared.ratio_inputs(), 1.0).unwrap();
    let paths = enumerate_mediator_paths(&data, PathMode::Full, 16).unwrap();
    let ipw = ipw_estimate(&data, &paths, &ratios).unwrap();

    assert_eq!(paths.len(), 4);
    let mut theta = 0.0;
    for (i, path) in paths.iter().enumerate() {
        let m = [path.at(1), path.at(2)];
        let phi_true = phi(model, d_prime, m, &mut Vec::new());
        let lambda_true = lambda(model, d_star, m, &mut Vec::new());
        theta += phi_true * lambda_true;
        for (name, c) in [
            ("one-step", &one_step.components[i]),
            ("plug-in", &plug_in.components[i]),
            ("ipw", &ipw.components[i]),
        ] {
            assert_eq!(c.path, m.to_vec());
            assert!((c.phi - phi_true).abs() < 1e-10, "{name} phi {m:?}: {} vs {phi_true}", c.phi);
            assert!((c.lambda - lambda_true).abs() < 1e-10, "{name} lambda {m:?}: {} vs {lambda_true}", c.lambda);
        }
    }
    for (name, est) in [("one-step", one_step.theta), ("plug-in", plug_in.theta), ("ipw", ipw.theta)] {
        assert!((est - theta).abs() < 1e-10, "{name} theta {est} vs {theta}");
    }
    assert!(one_step.influence_mean.abs() < 1e-8);
}

fn model_strategy() -> impl Strategy<Value = BinaryModel> {
    let rows: Vec<_> = (0..NODES).map(|k| prop::collection::vec(-1.0f64..1.0, k + 1)).collect();
    rows.prop_map(|coef| BinaryModel { coef })
}

fn rule_strategy() -> impl Strategy<Value = Rule> {
    prop_oneof![Just(Rule::Identity), Just(Rule::Delay), Just(Rule::SetFirst(1.0)), Just(Rule::SetFirst(0.0))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimators_match_enumeration(model in model_strategy(), d_prime in rule_strategy(), d_star in rule_strategy()) {
        check(&model, d_prime, d_star);
    }
}

#[test]
fn delay_against_natural_course() {
    let coef = (0..NODES).map(|k| (0..=k).map(|j| 0.3 * ((j + 2 * k) % 5) as f64 - 0.6).collect()).collect();
    check(&BinaryModel { coef }, Rule::Delay, Rule::Identity);
}
