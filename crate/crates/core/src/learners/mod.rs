//! Regression and classification learners used for every nuisance fit.
//!
//! All learners minimize (weighted) squared error or log-loss on a dense
//! feature matrix and return an immutable [`FittedModel`]. Probability
//! targets are clipped to `[1e-6, 1 - 1e-6]` at prediction time.

mod cells;
mod ensemble;
mod linear;
mod trees;

pub use ensemble::{cv_risk, fit_ensemble, EnsembleSpec, Stacking};

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::clamp_prob;
use crate::matrix::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Mean,
    Probability,
}

/// A single learner and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    /// Least squares with an ℓ2 penalty on standardized coefficients; the
    /// intercept is not penalized.
    RidgeLinear { penalty: f64 },
    /// Logistic regression (targets in `[0, 1]`) with the same penalty,
    /// fitted by Newton iterations.
    LogisticRidge { penalty: f64 },
    /// Gradient-boosted regression trees on squared loss.
    BoostedTrees {
        rounds: usize,
        max_depth: usize,
        shrinkage: f64,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
    /// Saturated model: the mean of the target within each distinct feature
    /// vector. Exact for discrete designs.
    CellMeans,
}

fn default_min_leaf() -> usize {
    10
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("{}: {msg}", self.name())));
        match *self {
            LearnerSpec::RidgeLinear { penalty } | LearnerSpec::LogisticRidge { penalty } => {
                if !(penalty.is_finite() && penalty >= 0.0) {
                    return bad("penalty must be finite and >= 0");
                }
            }
            LearnerSpec::BoostedTrees { rounds, max_depth, shrinkage, min_leaf } => {
                if rounds == 0 {
                    return bad("rounds must be >= 1");
                }
                if max_depth == 0 {
                    return bad("max_depth must be >= 1");
                }
                if !(shrinkage > 0.0 && shrinkage <= 1.0) {
                    return bad("shrinkage must lie in (0, 1]");
                }
                if min_leaf == 0 {
                    return bad("min_leaf must be >= 1");
                }
            }
            LearnerSpec::CellMeans => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::RidgeLinear { .. } => "ridge_linear",
            LearnerSpec::LogisticRidge { .. } => "logistic_ridge",
            LearnerSpec::BoostedTrees { .. } => "boosted_trees",
            LearnerSpec::CellMeans => "cell_means",
        }
    }

    /// Fits the learner. None of the single learners is randomized.
    pub fn fit(&self, x: &FeatureMatrix, y: &[f64], weights: Option<&[f64]>, kind: TargetKind) -> Result<FittedModel> {
        self.validate()?;
        check_inputs(x, y, weights)?;
        let predictor = match *self {
            LearnerSpec::RidgeLinear { penalty } => Predictor::Linear(linear::fit_ridge(x, y, weights, penalty)?),
            LearnerSpec::LogisticRidge { penalty } => {
                Predictor::Logistic(linear::fit_logistic(x, y, weights, penalty)?)
            }
            LearnerSpec::BoostedTrees { rounds, max_depth, shrinkage, min_leaf } => Predictor::Trees(Box::new(
                trees::fit_boosted(x, y, weights, trees::BoostParams { rounds, max_depth, shrinkage, min_leaf }),
            )),
            LearnerSpec::CellMeans => Predictor::Cells(cells::fit_cells(x, y, weights)),
        };
        Ok(FittedModel { kind, predictor })
    }
}

pub(crate) fn check_inputs(x: &FeatureMatrix, y: &[f64], weights: Option<&[f64]>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyData);
    }
    if x.nrows() != y.len() || weights.is_some_and(|w| w.len() != y.len()) {
        return Err(Error::MisalignedTables("features, targets and weights differ in length".into()));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("learner input".into()));
    }
    if let Some(w) = weights {
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonFinite("learner weights must be finite and >= 0".into()));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::EmptyData);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum Predictor {
    Linear(linear::LinearModel),
    Logistic(linear::LinearModel),
    Trees(Box<trees::BoostedModel>),
    Cells(cells::CellModel),
    Stack { weights: Vec<f64>, members: Vec<FittedModel> },
}

/// An immutable fitted predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    kind: TargetKind,
    predictor: Predictor,
}

impl FittedModel {
    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    /// Stacking weights when this is an ensemble.
    pub fn stack_weights(&self) -> Option<&[f64]> {
        match &self.predictor {
            Predictor::Stack { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let raw = match &self.predictor {
            Predictor::Linear(m) => m.linear(row),
            Predictor::Logistic(m) => crate::math::expit(m.linear(row)),
            Predictor::Trees(m) => m.predict(row),
            Predictor::Cells(m) => m.predict(row),
            Predictor::Stack { weights, members } => {
                weights.iter().zip(members).map(|(w, m)| if *w == 0.0 { 0.0 } else { w * m.predict(row) }).sum()
            }
        };
        match self.kind {
            TargetKind::Mean => raw,
            TargetKind::Probability => clamp_prob(raw),
        }
    }

    pub fn predict_all(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict(x.row(i))).collect()
    }

    pub(crate) fn stack(kind: TargetKind, weights: Vec<f64>, members: Vec<FittedModel>) -> Self {
        FittedModel { kind, predictor: Predictor::Stack { weights, members } }
    }
}
