//! Doubly robust D-functions.
//!
//! With `C'`/`C*` the truncated treatment-ratio products, `H` the path's
//! mediator-ratio products, `Q_{Z,tau+1} = Y` and `Q_{M,tau+1} = 1`:
//!
//! ```text
//! D_{L,t} = Σ_{s>=t}   C'_{t+1,s} H_{t,s}   {Q'_{Z,s+1} - Q_{L,s}}
//!         + Σ_{s>=t+1} C'_{t+1,s} H_{t,s-1} {Q_{L,s} - Q_{Z,s}(A_s)} + Q_{L,t}
//! D_{Z,t} = Σ_{s>=t}   C'_{t,s}   H_{t,s}   {Q'_{Z,s+1} - Q_{L,s}}
//!         + Σ_{s>=t}   C'_{t,s}   H_{t,s-1} {Q_{L,s} - Q_{Z,s}(A_s)}   + Q'_{Z,t}
//! D_{M,t} = Σ_{s>=t}   C*_{t,s} Π_{k=t}^{s-1} 1(M_k = m_k)
//!                      [1(M_s = m_s) Q*_{M,s+1} - Q_{M,s}(A_s)]          + Q*_{M,t}
//! ```
//!
//! Primes and stars mark regressions evaluated at the `d'`- and
//! `d*`-shifted treatment; empty products are one and empty sums zero.

use alloc::format;
use alloc::vec::Vec;

use super::NuisanceTable;
use crate::panel::{MediatorPath, PanelDataset};
use crate::policy::{CumulativeProducts, DensityRatioTable};
use crate::{Error, Result};

pub(crate) struct DContext<'a> {
    tau: usize,
    mediators: Vec<&'a [f64]>,
    c_prime: &'a CumulativeProducts,
    c_star: &'a CumulativeProducts,
    h: &'a CumulativeProducts,
    path: &'a MediatorPath,
}

impl<'a> DContext<'a> {
    pub fn new(
        dataset: &'a PanelDataset,
        ratios: &'a DensityRatioTable,
        h: &'a CumulativeProducts,
        path: &'a MediatorPath,
    ) -> Self {
        let tau = dataset.tau();
        DContext {
            tau,
            mediators: (1..=tau).map(|t| dataset.mediator(t)).collect(),
            c_prime: &ratios.c_prime,
            c_star: &ratios.c_star,
            h,
            path,
        }
    }

    pub fn d_l(&self, q: &NuisanceTable, t: usize, u: usize) -> f64 {
        let mut acc = q.q_l[t - 1][u];
        for s in t..=self.tau {
            let c = self.c_prime.get(t + 1, s, u);
            acc += c * self.h.get(t, s, u) * (q.q_z_shifted[s][u] - q.q_l[s - 1][u]);
            if s > t {
                acc += c * self.h.get(t, s - 1, u) * (q.q_l[s - 1][u] - q.q_z_observed[s - 1][u]);
            }
        }
        acc
    }

    pub fn d_z(&self, q: &NuisanceTable, t: usize, u: usize) -> f64 {
        let mut acc = q.q_z_shifted[t - 1][u];
        for s in t..=self.tau {
            let c = self.c_prime.get(t, s, u);
            acc += c * self.h.get(t, s, u) * (q.q_z_shifted[s][u] - q.q_l[s - 1][u]);
            acc += c * self.h.get(t, s - 1, u) * (q.q_l[s - 1][u] - q.q_z_observed[s - 1][u]);
        }
        acc
    }

    pub fn d_m(&self, q: &NuisanceTable, t: usize, u: usize) -> f64 {
        let mut acc = q.q_m_shifted[t - 1][u];
        let mut on_path = 1.0;
        for s in t..=self.tau {
            let hit = if self.mediators[s - 1][u] == self.path.at(s) { 1.0 } else { 0.0 };
            acc += self.c_star.get(t, s, u) * on_path * (hit * q.q_m_shifted[s][u] - q.q_m_observed[s - 1][u]);
            on_path *= hit;
        }
        acc
    }
}

/// Per-unit `D_{Z,1}` and `D_{M,1}` for one mediator path.
#[derive(Debug, Clone, PartialEq)]
pub struct EifValues {
    pub d_z1: Vec<f64>,
    pub d_m1: Vec<f64>,
}

/// Evaluates the D-functions at `t = 1` from a nuisance table, the ratio
/// table and the path's mediator products.
pub fn compute_d_functions(
    dataset: &PanelDataset,
    nuisance: &NuisanceTable,
    ratios: &DensityRatioTable,
    h: &CumulativeProducts,
) -> Result<EifValues> {
    let n = dataset.n();
    let tau = dataset.tau();
    let aligned = nuisance.q_l.len() == tau + 1
        && nuisance.q_l.iter().all(|r| r.len() == n)
        && nuisance.q_z_shifted.iter().chain(&nuisance.q_z_observed).all(|r| r.len() == n)
        && nuisance.q_m_shifted.iter().chain(&nuisance.q_m_observed).all(|r| r.len() == n)
        && ratios.c_prime.n() == n
        && ratios.c_prime.tau() == tau
        && h.n() == n
        && h.tau() == tau
        && nuisance.path.values.len() == tau;
    if !aligned {
        return Err(Error::MisalignedTables(format!("expected {n} units over {tau} timepoints")));
    }
    let ctx = DContext::new(dataset, ratios, h, &nuisance.path);
    Ok(EifValues {
        d_z1: (0..n).map(|u| ctx.d_z(nuisance, 1, u)).collect(),
        d_m1: (0..n).map(|u| ctx.d_m(nuisance, 1, u)).collect(),
    })
}
