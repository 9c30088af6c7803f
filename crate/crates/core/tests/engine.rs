//! End-to-end behaviour of the sequential-regression estimators.

use medseq_core::engine::*;
use medseq_core::learners::{EnsembleSpec, LearnerSpec};
use medseq_core::panel::RoleKind::*;
use medseq_core::panel::{assign_folds, enumerate_mediator_paths, PanelBuilder, PanelDataset, PathMode, Splitting};
use medseq_core::policy::{apply_policy, density_ratios, PolicyPair, PolicySpec};
use medseq_core::scm::*;
use medseq_core::Error;
use proptest::prelude::*;

/// Oracle values of the two-period design (two-phase Monte Carlo with
/// 1.6e7 draws per phase, standard error about 4e-4).
const TWO_PERIOD_TRUTH: [((f64, f64), f64); 4] = [
    ((-1.0, -1.0), -1.270728),
    ((-1.0, 1.0), -0.770754),
    ((1.0, -1.0), -0.784864),
    ((1.0, 1.0), -0.284891),
];

fn truth(u: f64, v: f64) -> f64 {
    TWO_PERIOD_TRUTH.iter().find(|(k, _)| *k == (u, v)).unwrap().1
}

fn one_period(outcome: &str, mediator: NodeLaw) -> Scm {
    Scm::new(ScmSpec {
        tau: 1,
        nodes: vec![
            NodeSpec::new("l", BaselineCovariate, 1, NodeLaw::Gaussian { formula: "0".into(), sd: 1.0 }),
            NodeSpec::new("a", Treatment, 1, NodeLaw::Bernoulli { formula: "0.2 + 0.6*expit(l)".into() }),
            NodeSpec::new("z", IntermediateConfounder, 1, NodeLaw::Gaussian { formula: "a + 0.5*l".into(), sd: 1.0 }),
            NodeSpec::new("m", Mediator, 1, mediator),
            NodeSpec::new("y", Outcome, 2, NodeLaw::Deterministic { formula: outcome.into() }),
        ],
    })
    .unwrap()
}

fn binary_mediator() -> NodeLaw {
    NodeLaw::Bernoulli { formula: "0.2 + 0.6*expit(z - a)".into() }
}

fn linear_config(seed: u64) -> EstimatorConfig {
    let mut c = EstimatorConfig::new(seed);
    c.learners = EnsembleSpec::single(LearnerSpec::RidgeLinear { penalty: 1e-8 });
    c.paths = PathSelection { mode: PathMode::Full, cap: 64 };
    c.truncation_quantile = 1.0;
    c
}

fn tables(data: &PanelDataset, pair: &PolicyPair, config: &EstimatorConfig) -> Vec<NuisanceTable> {
    let splitting = Splitting::CrossFit(assign_folds(data.n(), config.folds, config.seed).unwrap());
    let shared = fit_shared(data, &config.learners, &splitting, config.seed).unwrap();
    let ratios = density_ratios(data, pair, shared.ratio_inputs(), config.truncation_quantile).unwrap();
    let shift = |p: &PolicySpec| (1..=data.tau()).map(|t| apply_policy(p, data, t).unwrap()).collect::<Vec<_>>();
    let (sp, ss) = (shift(&pair.d_prime), shift(&pair.d_star));
    let setup = RegressionSetup {
        dataset: data,
        shifted_prime: &sp,
        shifted_star: &ss,
        ratios: &ratios,
        learners: &config.learners,
        splitting: &splitting,
        seed: config.seed,
    };
    enumerate_mediator_paths(data, config.paths.mode, config.paths.cap)
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (h, _) = ratios.mediator_products(p);
            sequential_regressions(&setup, p, i, &h, PseudoOutcome::DoublyRobust).unwrap()
        })
        .collect()
}

fn identity_pair() -> PolicyPair {
    PolicyPair { d_prime: PolicySpec::Identity, d_star: PolicySpec::Identity }
}

#[test]
fn deterministic_outcome_is_regressed_exactly() {
    let data = one_period("a + m", binary_mediator()).simulate(400, 1).unwrap();
    for table in tables(&data, &identity_pair(), &linear_config(2)) {
        let m = table.path.at(1);
        for u in 0..data.n() {
            let expected = data.treatment(1)[u] + m;
            assert!((table.q_z_observed[0][u] - expected).abs() < 1e-6);
        }
    }
}

#[test]
fn degenerate_mediator_puts_all_mass_on_its_level() {
    let base = one_period("a + z", binary_mediator()).simulate(300, 5).unwrap();
    let cols = |name: &str| base.column(name).unwrap().values.clone();
    let data = PanelBuilder::new(1)
        .observed(BaselineCovariate, 1, "l", &cols("l"))
        .observed(Treatment, 1, "a", &cols("a"))
        .observed(IntermediateConfounder, 1, "z", &cols("z"))
        .observed(Mediator, 1, "m", &vec![1.0; 300])
        .observed(Outcome, 2, "y", &cols("y"))
        .mediator_support(&[0.0, 1.0])
        .build()
        .unwrap();
    let config = linear_config(4);
    let tables = tables(&data, &identity_pair(), &config);
    for table in &tables {
        let expected = if table.path.at(1) == 1.0 { 1.0 } else { 0.0 };
        assert!(table.q_m_shifted[0].iter().all(|q| (q - expected).abs() < 1e-8));
    }
    let plug = plug_in_estimate(&data, &identity_pair(), &config).unwrap();
    assert!((plug.components[0].lambda).abs() < 1e-8);
    assert!((plug.components[1].lambda - 1.0).abs() < 1e-8);
}

#[test]
fn constant_outcome_gives_that_constant() {
    let data = one_period("2.5", binary_mediator()).simulate(300, 8).unwrap();
    let pair = PolicyPair { d_prime: PolicySpec::constant(1.0), d_star: PolicySpec::Identity };
    let report = estimate_theta(&data, &pair, &linear_config(3)).unwrap();
    assert!((report.theta - 2.5).abs() < 1e-8, "{}", report.theta);
    assert!(report.se <= 1e-8, "{}", report.se);
}

#[test]
fn identical_policies_give_zero_effects() {
    let data = one_period("a + m + z", binary_mediator()).simulate(300, 2).unwrap();
    let d = PolicySpec::constant(1.0);
    let dec = decompose_effects(&data, &d, &d, &EstimatorConfig::new(6)).unwrap();
    for e in [dec.total, dec.direct, dec.indirect] {
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.se, 0.0);
    }
}

#[test]
fn scaling_the_outcome_scales_every_estimate() {
    let data = one_period("a + m*z + l*l", binary_mediator()).simulate(400, 12).unwrap();
    let scaled = data.with_outcome(data.outcome().iter().map(|y| 3.5 * y).collect());
    let config = EstimatorConfig::new(1);
    let (d1, d0) = (PolicySpec::constant(1.0), PolicySpec::constant(0.0));
    let a = decompose_effects(&data, &d1, &d0, &config).unwrap();
    let b = decompose_effects(&scaled, &d1, &d0, &config).unwrap();
    let close = |x: f64, y: f64| (3.5 * x - y).abs() <= 1e-8 * (1.0 + y.abs());
    for (x, y) in [(a.total, b.total), (a.direct, b.direct), (a.indirect, b.indirect)] {
        assert!(close(x.estimate, y.estimate) && close(x.se, y.se), "{x:?} vs {y:?}");
    }
    assert!(close(a.theta_prime_star, b.theta_prime_star));
}

#[test]
fn two_period_estimates_cover_the_oracle_value() {
    let (u, v) = (1.0, 1.0);
    let scm = Scm::new(two_period_dgp(u, v).unwrap()).unwrap();
    let data = scm.simulate(5000, 31).unwrap();
    let pair = two_period_policies();
    let config = EstimatorConfig::new(32);
    let report = estimate_theta(&data, &pair, &config).unwrap();
    assert!(report.influence_mean.abs() <= 1e-8);
    assert!((report.theta - truth(u, v)).abs() <= 3.0 * report.se, "{} ± {}", report.theta, report.se);
    let plug = plug_in_estimate(&data, &pair, &config).unwrap();
    assert!((plug.theta - truth(u, v)).abs() <= 3.0 * report.se, "plug-in {}", plug.theta);
    let ratios = {
        let shared = fit_shared(&data, &config.learners, &Splitting::CrossFit(assign_folds(5000, 3, 32).unwrap()), 32).unwrap();
        density_ratios(&data, &pair, shared.ratio_inputs(), config.truncation_quantile).unwrap()
    };
    let paths = enumerate_mediator_paths(&data, PathMode::Full, 16).unwrap();
    let ipw = ipw_estimate(&data, &paths, &ratios).unwrap();
    assert!((ipw.theta - truth(u, v)).abs() <= 4.0 * report.se, "ipw {}", ipw.theta);
}

#[test]
fn decomposition_total_matches_oracle_total() {
    let scm = Scm::new(two_period_dgp(-1.0, 1.0).unwrap()).unwrap();
    let data = scm.simulate(3000, 41).unwrap();
    let pair = two_period_policies();
    let dec = decompose_effects(&data, &pair.d_prime, &pair.d_star, &EstimatorConfig::new(42)).unwrap();
    assert!((dec.direct.estimate + dec.indirect.estimate - dec.total.estimate).abs() <= 1e-12);
    let oracle = |d: &PolicySpec, seed| {
        let p = PolicyPair { d_prime: d.clone(), d_star: d.clone() };
        oracle_theta(&scm, &p, &OracleConfig::new(400_000, seed)).unwrap()
    };
    let (pp, ss) = (oracle(&pair.d_prime, 1), oracle(&pair.d_star, 2));
    let te = pp.theta - ss.theta;
    let se = (dec.total.se.powi(2) + pp.se.powi(2) + ss.se.powi(2)).sqrt();
    assert!((dec.total.estimate - te).abs() <= 3.0 * se, "{} vs {te}", dec.total.estimate);
}

#[test]
fn invalid_configuration_is_rejected() {
    let data = one_period("a", binary_mediator()).simulate(50, 1).unwrap();
    let mut config = EstimatorConfig::new(1);
    config.folds = 1;
    assert!(matches!(estimate_theta(&data, &identity_pair(), &config), Err(Error::InvalidParameter(_))));
    config.folds = 3;
    config.truncation_quantile = 0.0;
    assert!(matches!(estimate_theta(&data, &identity_pair(), &config), Err(Error::InvalidParameter(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn centering_and_additivity_hold_on_every_run(seed in 0u64..10_000, full in any::<bool>()) {
        let data = one_period("a + 2*m - z + l", binary_mediator()).simulate(150, seed).unwrap();
        let mut config = EstimatorConfig::new(seed);
        config.learners = EnsembleSpec {
            members: vec![LearnerSpec::RidgeLinear { penalty: 1e-4 }, LearnerSpec::BoostedTrees { rounds: 10, max_depth: 2, shrinkage: 0.3, min_leaf: 10 }],
            cv_folds: 3,
            stacking: medseq_core::learners::Stacking::ConvexWeights,
        };
        if full {
            config.paths.mode = PathMode::Full;
        }
        let pair = PolicyPair { d_prime: PolicySpec::constant(1.0), d_star: PolicySpec::Identity };
        let report = estimate_theta(&data, &pair, &config).unwrap();
        prop_assert!(report.influence_mean.abs() <= 1e-8);
        let dec = decompose_effects(&data, &pair.d_prime, &pair.d_star, &config).unwrap();
        prop_assert!((dec.direct.estimate + dec.indirect.estimate - dec.total.estimate).abs() <= 1e-12);
        prop_assert_eq!(dec.theta_prime_star, report.theta);
    }
}
