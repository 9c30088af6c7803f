//! Density ratios, their cumulative products and quantile truncation.

use alloc::vec::Vec;

use super::{shifted_pmf, PolicyPair};
use crate::math::{quantile_in_place, PROB_FLOOR};
use crate::panel::{history, MediatorPath, PanelDataset, RoleKind, VariableRole};
use crate::Result;

/// Products `Π_{k=l}^{u} G_k` for all `1 <= l <= u <= tau`, per unit.
/// Empty products (`l > u`) are one.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeProducts {
    tau: usize,
    n: usize,
    data: Vec<Vec<f64>>,
}

impl CumulativeProducts {
    /// `factors[t - 1][unit]` is the single-step ratio at `t`.
    pub fn from_factors(factors: &[Vec<f64>]) -> Self {
        let tau = factors.len();
        let n = factors.first().map_or(0, Vec::len);
        let mut data = alloc::vec![Vec::new(); tau * tau];
        for l in 1..=tau {
            let mut running = alloc::vec![1.0; n];
            for u in l..=tau {
                for (r, f) in running.iter_mut().zip(&factors[u - 1]) {
                    *r *= f;
                }
                data[(l - 1) * tau + u - 1] = running.clone();
            }
        }
        CumulativeProducts { tau, n, data }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, l: usize, u: usize, unit: usize) -> f64 {
        if l > u {
            1.0
        } else {
            self.data[(l - 1) * self.tau + u - 1][unit]
        }
    }

    fn entries(&self) -> impl Iterator<Item = &f64> {
        self.data.iter().flatten()
    }
}

/// Caps every product at the empirical `q`-quantile (linear interpolation)
/// of the family's strictly positive entries, pooled over units and
/// `(l, u)` ranges. Returns the capped family and the number of entries
/// that were lowered.
pub fn truncate_weights(products: &CumulativeProducts, q: f64) -> (CumulativeProducts, usize) {
    if q >= 1.0 {
        return (products.clone(), 0);
    }
    let mut pool: Vec<f64> = products.entries().copied().filter(|v| *v > 0.0).collect();
    if pool.is_empty() {
        return (products.clone(), 0);
    }
    let cap = quantile_in_place(&mut pool, q);
    let mut count = 0;
    let data = products
        .data
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    if v > cap {
                        count += 1;
                        cap
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    (CumulativeProducts { tau: products.tau, n: products.n, data }, count)
}

/// Nuisance estimates the ratios are built from.
#[derive(Debug, Clone, Copy)]
pub struct RatioInputs<'a> {
    /// `[t - 1][unit]` pmf over the treatment support.
    pub treatment_pmf: &'a [Vec<Vec<f64>>],
    /// `[t - 1]`: probability of remaining observed through `t` given
    /// `(A_t, H_{A,t})`, when anyone is censored at `t`.
    pub censoring: &'a [Option<Vec<f64>>],
    /// `[t - 1][unit]`: `ĝ_{M,t}(M_t | H_{M,t})` at the recorded mediator.
    pub mediator_probs: &'a [Vec<f64>],
}

/// Single-step ratios and truncated cumulative products for a policy pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRatioTable {
    /// `G'_{A,t}` as `[t - 1][unit]`, censoring factor included.
    pub g_prime: Vec<Vec<f64>>,
    pub g_star: Vec<Vec<f64>>,
    /// `1 / ĝ_{M,t}(M_t | H_{M,t})`; zero where `M_t` is unobserved.
    pub mediator_inverse: Vec<Vec<f64>>,
    pub c_prime: CumulativeProducts,
    pub c_star: CumulativeProducts,
    /// Probabilities raised to the floor before division.
    pub positivity_violations: usize,
    /// Cumulative products lowered by truncation in `c_prime` and `c_star`.
    pub truncated: usize,
    quantile: f64,
    mediators: Vec<Vec<f64>>,
}

impl DensityRatioTable {
    /// `G_{M,t}` for a path: `1{M_t = m_t} / ĝ_{M,t}(M_t | H_{M,t})`.
    pub fn mediator_ratio(&self, t: usize, unit: usize, path: &MediatorPath) -> f64 {
        if self.mediators[t - 1][unit] == path.at(t) {
            self.mediator_inverse[t - 1][unit]
        } else {
            0.0
        }
    }

    /// Truncated products `H_{l,u}` for a path, and how many were lowered.
    pub fn mediator_products(&self, path: &MediatorPath) -> (CumulativeProducts, usize) {
        let tau = self.mediators.len();
        let n = self.mediators.first().map_or(0, Vec::len);
        let factors: Vec<Vec<f64>> =
            (1..=tau).map(|t| (0..n).map(|u| self.mediator_ratio(t, u, path)).collect()).collect();
        truncate_weights(&CumulativeProducts::from_factors(&factors), self.quantile)
    }

    pub fn quantile(&self) -> f64 {
        self.quantile
    }
}

/// Builds `G'_{A,t}`, `G*_{A,t}` by pushforward of the estimated treatment
/// pmfs, multiplies in the remain-observed factor `1{obs_t} / P̂(obs_t)`,
/// and truncates the cumulative products at `quantile`.
pub fn density_ratios(
    dataset: &PanelDataset,
    pair: &PolicyPair,
    inputs: RatioInputs<'_>,
    quantile: f64,
) -> Result<DensityRatioTable> {
    let n = dataset.n();
    let tau = dataset.tau();
    let mut violations = 0;
    let mut g_prime = Vec::with_capacity(tau);
    let mut g_star = Vec::with_capacity(tau);
    for t in 1..=tau {
        let support = dataset.treatment_support(t);
        let observed = dataset.treatment(t);
        let anchor = VariableRole::new(RoleKind::Treatment, t);
        let mut gp = alloc::vec![0.0; n];
        let mut gs = alloc::vec![0.0; n];
        for u in 0..n {
            if !dataset.at_risk(u, t) {
                continue;
            }
            let pmf = &inputs.treatment_pmf[t - 1][u];
            let k = support.iter().position(|s| *s == observed[u]).unwrap_or(0);
            let mut denom = pmf[k];
            if denom <= PROB_FLOOR {
                violations += 1;
                denom = PROB_FLOOR;
            }
            let censor = match &inputs.censoring[t - 1] {
                Some(p) if dataset.observed_through(u, t) => 1.0 / p[u],
                Some(_) => 0.0,
                None => 1.0,
            };
            let h = history(dataset, u, anchor)?;
            let shifted_prime = shifted_pmf(&pair.d_prime, t, support, pmf, &h)?;
            let shifted_star = shifted_pmf(&pair.d_star, t, support, pmf, &h)?;
            gp[u] = shifted_prime[k] / denom * censor;
            gs[u] = shifted_star[k] / denom * censor;
        }
        g_prime.push(gp);
        g_star.push(gs);
    }
    let mut mediator_inverse = Vec::with_capacity(tau);
    for t in 1..=tau {
        let row = (0..n)
            .map(|u| {
                if !dataset.observed_through(u, t) {
                    return 0.0;
                }
                let mut p = inputs.mediator_probs[t - 1][u];
                if p <= PROB_FLOOR {
                    violations += 1;
                    p = PROB_FLOOR;
                }
                1.0 / p
            })
            .collect();
        mediator_inverse.push(row);
    }
    let (c_prime, tp) = truncate_weights(&CumulativeProducts::from_factors(&g_prime), quantile);
    let (c_star, ts) = truncate_weights(&CumulativeProducts::from_factors(&g_star), quantile);
    Ok(DensityRatioTable {
        g_prime,
        g_star,
        mediator_inverse,
        c_prime,
        c_star,
        positivity_violations: violations,
        truncated: tp + ts,
        quantile,
        mediators: (1..=tau).map(|t| dataset.mediator(t).to_vec()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_products_are_one() {
        let p = CumulativeProducts::from_factors(&[alloc::vec![2.0], alloc::vec![3.0]]);
        assert_eq!(p.get(2, 1, 0), 1.0);
        assert_eq!(p.get(1, 2, 0), 6.0);
        assert_eq!(p.get(2, 2, 0), 3.0);
    }

    #[test]
    fn outlier_is_capped_at_interpolated_quantile() {
        let mut w = alloc::vec![1.0; 99];
        w.push(1000.0);
        let p = CumulativeProducts::from_factors(&[w]);
        let (t, count) = truncate_weights(&p, 0.99);
        assert_eq!(count, 1);
        assert!((t.get(1, 1, 99) - 10.99).abs() < 1e-9);
        assert!((0..99).all(|u| t.get(1, 1, u) == 1.0));
        assert_eq!(truncate_weights(&p, 1.0).0, p);
    }

    #[test]
    fn equal_weights_are_unchanged() {
        let p = CumulativeProducts::from_factors(&[alloc::vec![1.5; 10], alloc::vec![2.0; 10]]);
        let (t, count) = truncate_weights(&p, 0.9);
        assert_eq!((t, count), (p, 0));
    }
}
