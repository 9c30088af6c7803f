//! Saturated cell-mean regression.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CellModel {
    cells: BTreeMap<Vec<u64>, f64>,
    /// Used for feature vectors never seen in training.
    overall: f64,
}

fn key(row: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 share a cell.
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

pub fn fit_cells(x: &FeatureMatrix, y: &[f64], weights: Option<&[f64]>) -> CellModel {
    let mut acc: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    let (mut tw, mut ty) = (0.0, 0.0);
    for (i, yi) in y.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let e = acc.entry(key(x.row(i))).or_insert((0.0, 0.0));
        e.0 += w;
        e.1 += w * yi;
        tw += w;
        ty += w * yi;
    }
    let overall = ty / tw;
    let cells = acc
        .into_iter()
        .map(|(k, (w, s))| (k, if w > 0.0 { s / w } else { overall }))
        .collect();
    CellModel { cells, overall }
}

impl CellModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        *self.cells.get(&key(row)).unwrap_or(&self.overall)
    }
}
