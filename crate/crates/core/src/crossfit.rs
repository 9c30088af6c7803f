//! Fitting one nuisance model per sample split.

use alloc::vec::Vec;

use crate::learners::{fit_ensemble, EnsembleSpec, FittedModel, TargetKind};
use crate::matrix::FeatureMatrix;
use crate::panel::Splitting;
use crate::par::try_map_indexed;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Models indexed by split part; a unit is predicted by the model of its
/// own part, which was trained without it under cross-fitting.
pub(crate) struct PartModels<'s> {
    splitting: &'s Splitting,
    models: Vec<FittedModel>,
}

impl PartModels<'_> {
    pub fn for_unit(&self, unit: usize) -> &FittedModel {
        &self.models[self.splitting.part_of(unit)]
    }
}

/// Fits `learner` once per part on eligible training units. `x` and `y`
/// hold one row per dataset unit.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_parts<'s>(
    splitting: &'s Splitting,
    learner: &EnsembleSpec,
    x: &FeatureMatrix,
    y: &[f64],
    eligible: &[bool],
    weights: Option<&[f64]>,
    kind: TargetKind,
    seed: u64,
    time: usize,
) -> Result<PartModels<'s>> {
    let models = try_map_indexed(splitting.parts(), |part| {
        let train: Vec<usize> = (0..y.len())
            .filter(|&u| eligible[u] && splitting.trains_on(part, u) && weights.is_none_or(|w| w[u] > 0.0))
            .collect();
        if train.is_empty() {
            return Err(Error::NoAtRiskUnits { time, fold: part });
        }
        let yt: Vec<f64> = train.iter().map(|&u| y[u]).collect();
        let wt: Option<Vec<f64>> = weights.map(|w| train.iter().map(|&u| w[u]).collect());
        fit_ensemble(learner, &x.select_rows(&train), &yt, wt.as_deref(), kind, derive_seed(seed, &[part as u64]))
    })?;
    Ok(PartModels { splitting, models })
}
