use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::PanelDataset;
use crate::{Error, Result};

pub const DEFAULT_PATH_CAP: usize = 4096;

/// A full mediator trajectory `(m_1, …, m_tau)`.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MediatorPath {
    pub values: Vec<f64>,
}

impl MediatorPath {
    pub fn new(values: Vec<f64>) -> Self {
        MediatorPath { values }
    }

    /// `m_t` for 1-based `t`.
    pub fn at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Cartesian product of the mediator supports.
    Full,
    /// Paths realized by units with complete follow-up.
    ObservedOnly,
}

/// Index set of the sum over mediator paths, in lexicographic order of
/// support positions (time 1 most significant).
pub fn enumerate_mediator_paths(dataset: &PanelDataset, mode: PathMode, cap: usize) -> Result<Vec<MediatorPath>> {
    let tau = dataset.tau();
    match mode {
        PathMode::Full => {
            let count = (1..=tau).try_fold(1usize, |acc, t| acc.checked_mul(dataset.mediator_support(t).len()));
            let count = count.unwrap_or(usize::MAX);
            if count > cap {
                return Err(Error::PathCapExceeded { count, cap });
            }
            let mut out = Vec::with_capacity(count);
            let mut idx = alloc::vec![0usize; tau];
            for _ in 0..count {
                out.push(MediatorPath::new(
                    (1..=tau).map(|t| dataset.mediator_support(t)[idx[t - 1]]).collect(),
                ));
                for t in (0..tau).rev() {
                    idx[t] += 1;
                    if idx[t] < dataset.mediator_support(t + 1).len() {
                        break;
                    }
                    idx[t] = 0;
                }
            }
            Ok(out)
        }
        PathMode::ObservedOnly => {
            let mut seen = BTreeSet::new();
            for u in 0..dataset.n() {
                if !dataset.outcome_observed(u) {
                    continue;
                }
                let key: Vec<usize> = (1..=tau)
                    .map(|t| {
                        let support = dataset.mediator_support(t);
                        support.iter().position(|m| *m == dataset.mediator(t)[u]).unwrap_or(0)
                    })
                    .collect();
                seen.insert(key);
                if seen.len() > cap {
                    return Err(Error::PathCapExceeded { count: seen.len(), cap });
                }
            }
            if seen.is_empty() {
                return Err(Error::NoUsablePaths);
            }
            Ok(seen
                .into_iter()
                .map(|key| {
                    MediatorPath::new(key.iter().enumerate().map(|(t, &i)| dataset.mediator_support(t + 1)[i]).collect())
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelBuilder;
    use crate::panel::RoleKind::*;

    fn panel(m1: &[f64], m2: &[f64]) -> PanelDataset {
        let n = m1.len();
        let zeros = alloc::vec![0.0; n];
        PanelBuilder::new(2)
            .observed(Treatment, 1, "A1", &zeros)
            .observed(Mediator, 1, "M1", m1)
            .observed(Treatment, 2, "A2", &zeros)
            .observed(Mediator, 2, "M2", m2)
            .observed(Outcome, 3, "Y", &zeros)
            .mediator_support(&[0.0, 1.0])
            .build()
            .unwrap()
    }

    #[test]
    fn full_is_cartesian_product() {
        let d = panel(&[0.0, 1.0], &[0.0, 1.0]);
        let paths = enumerate_mediator_paths(&d, PathMode::Full, DEFAULT_PATH_CAP).unwrap();
        let vals: Vec<_> = paths.iter().map(|p| p.values.clone()).collect();
        assert_eq!(vals, [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
        assert!(matches!(
            enumerate_mediator_paths(&d, PathMode::Full, 3),
            Err(Error::PathCapExceeded { count: 4, cap: 3 })
        ));
    }

    #[test]
    fn observed_only_keeps_realized_paths() {
        let d = panel(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]);
        let paths = enumerate_mediator_paths(&d, PathMode::ObservedOnly, DEFAULT_PATH_CAP).unwrap();
        let vals: Vec<_> = paths.iter().map(|p| p.values.clone()).collect();
        assert_eq!(vals, [[0.0, 0.0], [1.0, 1.0]]);
    }
}
