//! Cross-validated stacking of learners.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_inputs, FittedModel, LearnerSpec, TargetKind};
use crate::matrix::FeatureMatrix;
use crate::par::try_map_indexed;
use crate::rng::balanced_partition;
use crate::{Error, Result};

/// Most members for which every subset is searched when stacking.
const MAX_STACK_MEMBERS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stacking {
    /// Simplex weights minimizing cross-validated squared error.
    #[default]
    ConvexWeights,
    /// The single member with the lowest cross-validated risk.
    DiscreteSelect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub members: Vec<LearnerSpec>,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub stacking: Stacking,
}

fn default_cv_folds() -> usize {
    5
}

impl EnsembleSpec {
    pub fn single(member: LearnerSpec) -> Self {
        EnsembleSpec { members: alloc::vec![member], cv_folds: default_cv_folds(), stacking: Stacking::ConvexWeights }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one member".into()));
        }
        if self.members.len() > MAX_STACK_MEMBERS {
            return Err(Error::InvalidParameter(format!("at most {MAX_STACK_MEMBERS} ensemble members")));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidParameter("cv_folds must be >= 2".into()));
        }
        self.members.iter().try_for_each(LearnerSpec::validate)
    }
}

/// Held-out predictions of `spec` for every row under the fold `labels`.
fn cv_predictions(
    spec: &LearnerSpec,
    x: &FeatureMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    kind: TargetKind,
    labels: &[usize],
    k: usize,
) -> Result<Vec<f64>> {
    let per_fold = try_map_indexed(k, |f| {
        let train: Vec<usize> = (0..y.len()).filter(|&i| labels[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| labels[i] == f).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let wt: Option<Vec<f64>> = weights.map(|w| train.iter().map(|&i| w[i]).collect());
        let model = spec.fit(&x.select_rows(&train), &yt, wt.as_deref(), kind)?;
        Ok(test.iter().map(|&i| (i, model.predict(x.row(i)))).collect::<Vec<_>>())
    })?;
    let mut out = alloc::vec![0.0; y.len()];
    for (i, p) in per_fold.into_iter().flatten() {
        out[i] = p;
    }
    Ok(out)
}

fn weighted_risk(pred: &[f64], y: &[f64], weights: Option<&[f64]>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        let w = weights.map_or(1.0, |w| w[i]);
        num += w * (y[i] - pred[i]) * (y[i] - pred[i]);
        den += w;
    }
    num / den
}

/// Pooled held-out mean squared error over a `folds`-way split.
pub fn cv_risk(spec: &LearnerSpec, x: &FeatureMatrix, y: &[f64], folds: usize, seed: u64) -> Result<f64> {
    check_inputs(x, y, None)?;
    if folds < 2 || folds > y.len() {
        return Err(Error::InvalidFolds { k: folds, n: y.len() });
    }
    let labels = balanced_partition(y.len(), folds, seed);
    let pred = cv_predictions(spec, x, y, None, TargetKind::Mean, &labels, folds)?;
    Ok(weighted_risk(&pred, y, None))
}

/// Fits the ensemble: cross-validated member predictions determine the
/// stacking weights, then members with positive weight are refitted on all
/// rows.
pub fn fit_ensemble(
    spec: &EnsembleSpec,
    x: &FeatureMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    kind: TargetKind,
    seed: u64,
) -> Result<FittedModel> {
    spec.validate()?;
    check_inputs(x, y, weights)?;
    let m = spec.members.len();
    let alpha = if m == 1 {
        alloc::vec![1.0]
    } else {
        let k = spec.cv_folds;
        if k > y.len() {
            return Err(Error::InvalidFolds { k, n: y.len() });
        }
        let labels = balanced_partition(y.len(), k, seed);
        let preds = try_map_indexed(m, |j| cv_predictions(&spec.members[j], x, y, weights, kind, &labels, k))?;
        match spec.stacking {
            Stacking::ConvexWeights => convex_weights(&preds, y, weights),
            Stacking::DiscreteSelect => {
                let mut best = 0;
                let mut best_risk = f64::INFINITY;
                for (j, p) in preds.iter().enumerate() {
                    let r = weighted_risk(p, y, weights);
                    if r < best_risk {
                        best = j;
                        best_risk = r;
                    }
                }
                let mut a = alloc::vec![0.0; m];
                a[best] = 1.0;
                a
            }
        }
    };
    let members = try_map_indexed(m, |j| {
        if alpha[j] > 0.0 {
            spec.members[j].fit(x, y, weights, kind).map(Some)
        } else {
            Ok(None)
        }
    })?;
    // Zero-weight members are never evaluated; keep a cheap placeholder.
    let members = members
        .into_iter()
        .map(|f| f.unwrap_or_else(|| FittedModel::stack(kind, Vec::new(), Vec::new())))
        .collect();
    Ok(FittedModel::stack(kind, alpha, members))
}

/// Simplex-constrained least squares by exact search over supports: for
/// every member subset the equality-constrained problem is solved in closed
/// form, and the best feasible (nonnegative) solution wins. Subsets are
/// visited smallest first, so ties favour fewer and earlier members.
pub(crate) fn convex_weights(preds: &[Vec<f64>], y: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    let m = preds.len();
    let n = y.len();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut gram = DMatrix::zeros(m, m);
    let mut cross = DVector::zeros(m);
    for i in 0..n {
        let wi = w(i);
        for a in 0..m {
            cross[a] += wi * preds[a][i] * y[i];
            for b in 0..=a {
                gram[(a, b)] += wi * preds[a][i] * preds[b][i];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    let risk_of = |alpha: &[f64]| {
        let pred: Vec<f64> = (0..n).map(|i| (0..m).map(|a| alpha[a] * preds[a][i]).sum()).collect();
        weighted_risk(&pred, y, weights)
    };

    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << m))
        .map(|mask| (0..m).filter(|a| mask & (1 << a) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in subsets {
        let k = s.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (r, &a) in s.iter().enumerate() {
            for (c, &b) in s.iter().enumerate() {
                kkt[(r, c)] = gram[(a, b)];
            }
            kkt[(r, k)] = 1.0;
            kkt[(k, r)] = 1.0;
            rhs[r] = cross[a];
        }
        rhs[k] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) || (0..k).any(|r| sol[r] < -1e-12) {
            continue;
        }
        let mut alpha = alloc::vec![0.0; m];
        for (r, &a) in s.iter().enumerate() {
            alpha[a] = sol[r].max(0.0);
        }
        let total: f64 = alpha.iter().sum();
        if total <= 0.0 {
            continue;
        }
        alpha.iter_mut().for_each(|v| *v /= total);
        let risk = risk_of(&alpha);
        if best.as_ref().is_none_or(|(r, _)| risk < *r - 1e-12 * (1.0 + r.abs())) {
            best = Some((risk, alpha));
        }
    }
    best.map(|(_, a)| a).unwrap_or_else(|| {
        let mut a = alloc::vec![0.0; m];
        a[0] = 1.0;
        a
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn single_member_has_unit_weight() {
        let x = FeatureMatrix::column(&[0.0, 1.0, 2.0, 3.0]);
        let spec = EnsembleSpec::single(LearnerSpec::RidgeLinear { penalty: 0.0 });
        let m = fit_ensemble(&spec, &x, &[1.0, 2.0, 3.0, 4.0], None, TargetKind::Mean, 0).unwrap();
        assert_eq!(m.stack_weights(), Some(&[1.0][..]));
        assert!((m.predict(&[4.0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_select_breaks_ties_by_member_order() {
        let x = FeatureMatrix::column(&(0..20).map(|i| i as f64).collect::<Vec<_>>());
        let y: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let member = LearnerSpec::RidgeLinear { penalty: 0.5 };
        let spec = EnsembleSpec { members: alloc::vec![member.clone(), member], cv_folds: 4, stacking: Stacking::DiscreteSelect };
        let m = fit_ensemble(&spec, &x, &y, None, TargetKind::Mean, 3).unwrap();
        assert_eq!(m.stack_weights(), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn simplex_weights_recover_exact_combination() {
        let mut rng = crate::rng::rng_from(5);
        let a: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.3 * p + 0.7 * q).collect();
        let w = convex_weights(&[a, b], &y, None);
        assert!((w[0] - 0.3).abs() < 1e-10 && (w[1] - 0.7).abs() < 1e-10);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_solution_is_projected_to_a_vertex() {
        // y tracks `a`; `b` is anti-correlated, so the unconstrained
        // solution would put negative weight on it.
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 49.0 - v).collect();
        let y: Vec<f64> = a.iter().map(|v| 1.2 * v).collect();
        let w = convex_weights(&[a, b], &y, None);
        assert_eq!(w, [1.0, 0.0]);
    }
}
