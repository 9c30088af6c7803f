//! Identification and estimation of the interventional parameter
//! `θ = Σ_m̄ φ(m̄) λ(m̄)`.
//!
//! `φ(m̄)` is the mean outcome when treatment follows `d'` and the mediators
//! are held at `m̄`; `λ(m̄)` is the probability of the mediator path `m̄`
//! when treatment follows `d*`. Both are estimated by backward sequential
//! regression; the one-step estimator averages the doubly robust
//! D-functions and takes its standard error from the efficient influence
//! function.

mod dfun;
mod effectmod;
mod estimate;
mod nuisance;

pub use dfun::{compute_d_functions, EifValues};
pub use effectmod::{effect_modification_slopes, Slope};
pub use estimate::{
    decompose_effects, estimate_theta, ipw_estimate, plug_in_estimate, Effect, EffectDecomposition, EstimateReport,
    IpwEstimate, PathComponent,
};
pub use nuisance::{fit_shared, sequential_regressions, NuisanceTable, PseudoOutcome, RegressionSetup, SharedNuisance};

use serde::{Deserialize, Serialize};

use crate::learners::{EnsembleSpec, LearnerSpec, Stacking};
use crate::panel::{assign_folds, PathMode, Splitting, DEFAULT_PATH_CAP};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSelection {
    pub mode: PathMode,
    pub cap: usize,
}

impl Default for PathSelection {
    fn default() -> Self {
        PathSelection { mode: PathMode::ObservedOnly, cap: DEFAULT_PATH_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Nuisances for each fold are fitted on the remaining folds.
    #[default]
    CrossFit,
    /// Nuisances are fitted once on all units.
    InSample,
}

/// Everything the estimators need besides data and policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub folds: usize,
    pub truncation_quantile: f64,
    pub paths: PathSelection,
    pub seed: u64,
    pub learners: EnsembleSpec,
    #[serde(default)]
    pub splitting: SplitMode,
}

impl EstimatorConfig {
    /// Three folds, truncation at the 0.99 quantile, observed paths, and a
    /// convex stack of ridge regression and boosted trees.
    pub fn new(seed: u64) -> Self {
        EstimatorConfig {
            folds: 3,
            truncation_quantile: 0.99,
            paths: PathSelection::default(),
            seed,
            learners: default_learners(),
            splitting: SplitMode::CrossFit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter("estimator.folds must be >= 2".into()));
        }
        if !(self.truncation_quantile > 0.0 && self.truncation_quantile <= 1.0) {
            return Err(Error::InvalidParameter("estimator.truncation_quantile must lie in (0, 1]".into()));
        }
        if self.paths.cap == 0 {
            return Err(Error::InvalidParameter("estimator.paths.cap must be >= 1".into()));
        }
        self.learners.validate()
    }

    pub(crate) fn splitting(&self, n: usize) -> Result<Splitting> {
        match self.splitting {
            SplitMode::CrossFit => Ok(Splitting::CrossFit(assign_folds(n, self.folds, self.seed)?)),
            SplitMode::InSample => Ok(Splitting::InSample),
        }
    }
}

pub fn default_learners() -> EnsembleSpec {
    EnsembleSpec {
        members: alloc::vec![
            LearnerSpec::RidgeLinear { penalty: 1e-4 },
            LearnerSpec::BoostedTrees { rounds: 50, max_depth: 2, shrinkage: 0.1, min_leaf: 10 },
        ],
        cv_folds: 5,
        stacking: Stacking::ConvexWeights,
    }
}

/// Run diagnostics surfaced in every report.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Estimated probabilities raised to the 1e-6 floor before division.
    pub positivity_violations: usize,
    /// Cumulative weight products lowered by quantile truncation.
    pub truncated_weights: usize,
    /// Mediator paths in the sum.
    pub paths: usize,
    /// Share of fully followed units whose realized mediator path is in the
    /// sum.
    pub path_coverage: f64,
    /// Outcome regressions that fell back from path subsetting to mediator
    /// indicators because fewer than 30 units matched the path.
    pub subset_fallbacks: usize,
}
