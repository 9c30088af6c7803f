use alloc::vec::Vec;

use crate::rng::balanced_partition;
use crate::{Error, Result};

/// Unit-level partition into `k` folds. Labels are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub membership: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn fold_of(&self, unit: usize) -> usize {
        self.membership[unit]
    }

    /// Units held out in `fold`.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len()).filter(|&u| self.membership[u] == fold).collect()
    }

    /// Units used for training when predicting on `fold`.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len()).filter(|&u| self.membership[u] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.k];
        for &f in &self.membership {
            sizes[f] += 1;
        }
        sizes
    }
}

/// How nuisance models are trained relative to the units they predict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Splitting {
    /// Each unit is predicted by models fitted on the other folds.
    CrossFit(FoldAssignment),
    /// One model per nuisance fitted on every unit. Only appropriate when
    /// the learner is exact for the population (e.g. saturated cell means on
    /// an enumerated distribution).
    InSample,
}

impl Splitting {
    pub fn parts(&self) -> usize {
        match self {
            Splitting::CrossFit(f) => f.k,
            Splitting::InSample => 1,
        }
    }

    pub fn part_of(&self, unit: usize) -> usize {
        match self {
            Splitting::CrossFit(f) => f.fold_of(unit),
            Splitting::InSample => 0,
        }
    }

    /// Whether the model for `part` is trained on `unit`.
    pub fn trains_on(&self, part: usize, unit: usize) -> bool {
        match self {
            Splitting::CrossFit(f) => f.fold_of(unit) != part,
            Splitting::InSample => true,
        }
    }
}

/// Near-balanced random partition of `n` units, reproducible from `seed`.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::InvalidFolds { k, n });
    }
    Ok(FoldAssignment { k, membership: balanced_partition(n, k, seed), seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_are_balanced() {
        let mut s = assign_folds(6, 3, 1).unwrap().sizes();
        s.sort();
        assert_eq!(s, [2, 2, 2]);
        let mut s = assign_folds(7, 3, 1).unwrap().sizes();
        s.sort();
        assert_eq!(s, [2, 2, 3]);
    }

    #[test]
    fn reproducible_and_validated() {
        assert_eq!(assign_folds(50, 3, 9).unwrap(), assign_folds(50, 3, 9).unwrap());
        assert!(matches!(assign_folds(2, 3, 0), Err(Error::InvalidFolds { .. })));
        assert!(matches!(assign_folds(5, 1, 0), Err(Error::InvalidFolds { .. })));
    }
}
