//! Gradient-boosted regression trees on squared loss with exact greedy
//! splits over presorted features.

use alloc::vec::Vec;

use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    init: f64,
    shrinkage: f64,
    trees: Vec<Tree>,
}

impl BoostedModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.init + self.shrinkage * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

pub fn fit_boosted(x: &FeatureMatrix, y: &[f64], weights: Option<&[f64]>, params: BoostParams) -> BoostedModel {
    let n = x.nrows();
    let p = x.ncols();
    let w: Vec<f64> = weights.map_or_else(|| alloc::vec![1.0; n], |w| w.to_vec());
    let total: f64 = w.iter().sum();
    let init = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / total;

    let columns: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| x.get(i, j)).collect()).collect();
    let mut sorted: Vec<Vec<usize>> = Vec::with_capacity(p);
    for col in &columns {
        let mut idx: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
        idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        sorted.push(idx);
    }
    let m = sorted.first().map_or_else(|| (0..n).filter(|&i| w[i] > 0.0).count(), Vec::len);

    let mut fitted = alloc::vec![init; n];
    let mut residual = alloc::vec![0.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut builder = TreeBuilder {
        columns: &columns,
        w: &w,
        params,
        order: sorted.clone(),
        all_rows: (0..n).filter(|&i| w[i] > 0.0).collect(),
        scratch: alloc::vec![0; m],
        mask: alloc::vec![false; n],
        nodes: Vec::new(),
        leaves: Vec::new(),
    };
    for _ in 0..params.rounds {
        for i in 0..n {
            residual[i] = y[i] - fitted[i];
        }
        for (dst, src) in builder.order.iter_mut().zip(&sorted) {
            dst.copy_from_slice(src);
        }
        builder.nodes.clear();
        builder.leaves.clear();
        builder.grow(&residual, 0, m, 0);
        let mut moved = false;
        for &(start, end, value) in &builder.leaves {
            let step = params.shrinkage * value;
            if step != 0.0 {
                moved = true;
                let rows = if p == 0 { &builder.all_rows[start..end] } else { &builder.order[0][start..end] };
                for &i in rows {
                    fitted[i] += step;
                }
            }
        }
        trees.push(Tree { nodes: builder.nodes.clone() });
        if !moved {
            // Residuals can no longer be split or are already zero.
            break;
        }
    }
    BoostedModel { init, shrinkage: params.shrinkage, trees }
}

/// Grows one tree over row segments of per-feature sort orders. A node owns
/// the same segment `[start, end)` of every order; splitting partitions each
/// segment stably so children stay sorted.
struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    w: &'a [f64],
    params: BoostParams,
    order: Vec<Vec<usize>>,
    /// Row list for designs without features.
    all_rows: Vec<usize>,
    scratch: Vec<usize>,
    mask: Vec<bool>,
    nodes: Vec<Node>,
    /// `(start, end, value)` of every leaf.
    leaves: Vec<(usize, usize, f64)>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, r: &[f64], start: usize, end: usize, depth: usize) -> usize {
        let rows: &[usize] = if self.order.is_empty() { &self.all_rows[start..end] } else { &self.order[0][start..end] };
        let (mut sw, mut sr, mut srr) = (0.0, 0.0, 0.0);
        for &i in rows {
            let wi = self.w[i];
            sw += wi;
            sr += wi * r[i];
            srr += wi * r[i] * r[i];
        }
        let leaf = if sw > 0.0 { sr / sw } else { 0.0 };
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(leaf));
        let count = end - start;
        let spread = if sw > 0.0 { srr - sr * sr / sw } else { 0.0 };
        let best = if depth >= self.params.max_depth
            || count < 2 * self.params.min_leaf
            || sw <= 0.0
            || spread <= 1e-12 * (1.0 + srr)
        {
            None
        } else {
            self.best_split(r, start, end, sw, sr, spread)
        };
        let Some(best) = best else {
            self.leaves.push((start, end, leaf));
            return id;
        };
        let col = &self.columns[best.feature];
        for &i in &self.order[best.feature][start..end] {
            self.mask[i] = col[i] <= best.threshold;
        }
        let mut mid = start;
        for list in self.order.iter_mut() {
            let seg = &mut list[start..end];
            let mut l = 0;
            let mut k = 0;
            for idx in 0..seg.len() {
                let i = seg[idx];
                if self.mask[i] {
                    seg[l] = i;
                    l += 1;
                } else {
                    self.scratch[k] = i;
                    k += 1;
                }
            }
            seg[l..].copy_from_slice(&self.scratch[..k]);
            mid = start + l;
        }
        let left = self.grow(r, start, mid, depth + 1);
        let right = self.grow(r, mid, end, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    fn best_split(&self, r: &[f64], start: usize, end: usize, sw: f64, sr: f64, spread: f64) -> Option<Candidate> {
        let base = sr * sr / sw;
        let min_gain = 1e-10 * spread;
        let min_leaf = self.params.min_leaf;
        let m = end - start;
        let mut best: Option<Candidate> = None;
        for (j, list) in self.order.iter().enumerate() {
            let list = &list[start..end];
            let col = &self.columns[j];
            let (mut lw, mut lr) = (0.0, 0.0);
            for pos in 0..m - 1 {
                let i = list[pos];
                lw += self.w[i];
                lr += self.w[i] * r[i];
                let count_left = pos + 1;
                if count_left < min_leaf || m - count_left < min_leaf {
                    continue;
                }
                let a = col[i];
                let b = col[list[pos + 1]];
                if a == b {
                    continue;
                }
                let rw = sw - lw;
                if lw <= 0.0 || rw <= 0.0 {
                    continue;
                }
                let rr = sr - lr;
                let gain = lr * lr / lw + rr * rr / rw - base;
                if gain > min_gain && best.as_ref().is_none_or(|c| gain > c.gain) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(Candidate { feature: j, threshold, gain });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_is_learned() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|v| if *v < 20.0 { -1.0 } else { 2.0 }).collect();
        let x = FeatureMatrix::column(&xs);
        let m = fit_boosted(&x, &y, None, BoostParams { rounds: 50, max_depth: 1, shrinkage: 0.5, min_leaf: 5 });
        assert!((m.predict(&[3.0]) + 1.0).abs() < 1e-6);
        assert!((m.predict(&[30.0]) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn fits_are_repeatable() {
        let rows: Vec<[f64; 2]> = (0..60).map(|i| [(i % 7) as f64, ((i * 13) % 11) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[1] - r[0]).collect();
        let x = FeatureMatrix::from_rows(&rows);
        let p = BoostParams { rounds: 30, max_depth: 3, shrinkage: 0.1, min_leaf: 3 };
        assert_eq!(fit_boosted(&x, &y, None, p), fit_boosted(&x, &y, None, p));
    }
}
