use alloc::string::String;
use alloc::vec::Vec;

use super::{PanelDataset, Position, RoleKind};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Value(usize),
    Level { column: usize, level: f64 },
}

/// Feature layout for a regression on a history prefix.
///
/// Numeric columns enter as-is. Treatments and mediators are encoded by
/// indicators of every support level but the first, so a binary variable is
/// one 0/1 column and a K-level one gives K − 1 dummies.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    sources: Vec<Source>,
    names: Vec<String>,
}

impl Design {
    /// All columns strictly before `pos`.
    pub fn before(dataset: &PanelDataset, pos: Position) -> Self {
        let mut sources = Vec::new();
        let mut names = Vec::new();
        for (idx, col) in dataset.columns_before(pos) {
            let support = match col.key.role.kind {
                RoleKind::Treatment => Some(dataset.treatment_support(col.key.role.time)),
                RoleKind::Mediator => Some(dataset.mediator_support(col.key.role.time)),
                _ => None,
            };
            match support {
                Some(levels) => {
                    for &level in levels.iter().skip(1) {
                        sources.push(Source::Level { column: idx, level });
                        names.push(alloc::format!("{}=={}", col.key.name, level));
                    }
                }
                None => {
                    sources.push(Source::Value(idx));
                    names.push(col.key.name.clone());
                }
            }
        }
        Design { sources, names }
    }

    pub fn ncols(&self) -> usize {
        self.sources.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Writes the encoded features of `unit`. `overrides` replaces the value
    /// of a column (by global index) before encoding.
    pub fn fill_row(&self, dataset: &PanelDataset, unit: usize, overrides: &[(usize, f64)], out: &mut [f64]) {
        let value = |col: usize| {
            overrides
                .iter()
                .find(|(c, _)| *c == col)
                .map_or(dataset.columns()[col].values[unit], |(_, v)| *v)
        };
        for (slot, src) in out.iter_mut().zip(&self.sources) {
            *slot = match *src {
                Source::Value(c) => value(c),
                Source::Level { column, level } => {
                    if value(column) == level {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
    }

    /// Feature matrix for `units`. Each override is a column index with one
    /// replacement value per unit of the dataset.
    pub fn matrix(&self, dataset: &PanelDataset, units: &[usize], overrides: &[(usize, &[f64])]) -> FeatureMatrix {
        let p = self.ncols();
        let mut m = FeatureMatrix::zeros(units.len(), p);
        let mut ov: Vec<(usize, f64)> = Vec::with_capacity(overrides.len());
        for (r, &u) in units.iter().enumerate() {
            ov.clear();
            ov.extend(overrides.iter().map(|(c, vals)| (*c, vals[u])));
            self.fill_row(dataset, u, &ov, m.row_mut(r));
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelBuilder;
    use crate::panel::RoleKind::*;

    #[test]
    fn categorical_encoding_and_override() {
        let d = PanelBuilder::new(1)
            .observed(BaselineCovariate, 1, "L1", &[0.5, 1.5])
            .observed(Treatment, 1, "A1", &[0.0, 2.0])
            .observed(Mediator, 1, "M1", &[1.0, 0.0])
            .observed(Outcome, 2, "Y", &[0.0, 0.0])
            .treatment_support(&[0.0, 1.0, 2.0])
            .mediator_support(&[0.0, 1.0])
            .build()
            .unwrap();
        let design = Design::before(&d, Position { time: 1, rank: 4 });
        assert_eq!(design.names(), ["L1", "A1==1", "A1==2"]);
        let m = design.matrix(&d, &[0, 1], &[]);
        assert_eq!(m.row(0), &[0.5, 0.0, 0.0]);
        assert_eq!(m.row(1), &[1.5, 0.0, 1.0]);
        let shifted = [1.0, 1.0];
        let m = design.matrix(&d, &[1], &[(1, &shifted)]);
        assert_eq!(m.row(0), &[1.5, 1.0, 0.0]);
    }
}
