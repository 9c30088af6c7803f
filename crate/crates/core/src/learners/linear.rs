//! Ridge-penalized linear and logistic regression on standardized features.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::math::{abs, expit, ln, sqrt};
use crate::matrix::FeatureMatrix;
use crate::{Error, Result};

/// `intercept + coef · x` on the original feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    intercept: f64,
    coef: Vec<f64>,
}

impl LinearModel {
    pub fn linear(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Weighted standardization. Constant columns are dropped (coefficient 0).
struct Standardized {
    kept: Vec<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
    z: DMatrix<f64>,
    w: Vec<f64>,
}

fn standardize(x: &FeatureMatrix, weights: Option<&[f64]>) -> Standardized {
    let n = x.nrows();
    let total = weights.map_or(n as f64, |w| w.iter().sum());
    // Weights rescaled to mean one so the penalty has the same meaning
    // weighted or not.
    let w: Vec<f64> = match weights {
        Some(w) => w.iter().map(|v| v * n as f64 / total).collect(),
        None => alloc::vec![1.0; n],
    };
    let mut kept = Vec::new();
    let mut center = Vec::new();
    let mut scale = Vec::new();
    for j in 0..x.ncols() {
        let m = (0..n).map(|i| w[i] * x.get(i, j)).sum::<f64>() / n as f64;
        let v = (0..n).map(|i| w[i] * (x.get(i, j) - m) * (x.get(i, j) - m)).sum::<f64>() / n as f64;
        let sd = sqrt(v);
        if sd > 1e-12 * (1.0 + abs(m)) {
            kept.push(j);
            center.push(m);
            scale.push(sd);
        }
    }
    let z = DMatrix::from_fn(n, kept.len(), |i, k| (x.get(i, kept[k]) - center[k]) / scale[k]);
    Standardized { kept, center, scale, z, w }
}

impl Standardized {
    fn to_model(&self, p: usize, intercept_std: f64, beta: &DVector<f64>) -> LinearModel {
        let mut coef = alloc::vec![0.0; p];
        let mut intercept = intercept_std;
        for (k, &j) in self.kept.iter().enumerate() {
            coef[j] = beta[k] / self.scale[k];
            intercept -= coef[j] * self.center[k];
        }
        LinearModel { intercept, coef }
    }
}

/// Solves `a β = b` for symmetric positive definite `a`, treating a
/// numerically rank-deficient system as singular.
fn spd_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, v| m.max(abs(*v)));
    let chol = a.cholesky().ok_or(Error::SingularDesign)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if l.nrows() > 0 && min_pivot <= 1e-10 * max_diag {
        return Err(Error::SingularDesign);
    }
    Ok(chol.solve(&b))
}

pub fn fit_ridge(x: &FeatureMatrix, y: &[f64], weights: Option<&[f64]>, penalty: f64) -> Result<LinearModel> {
    let n = x.nrows();
    let s = standardize(x, weights);
    let y_mean = (0..n).map(|i| s.w[i] * y[i]).sum::<f64>() / n as f64;
    let p = s.kept.len();
    if p == 0 {
        return Ok(LinearModel { intercept: y_mean, coef: alloc::vec![0.0; x.ncols()] });
    }
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for i in 0..n {
        let wi = s.w[i];
        if wi == 0.0 {
            continue;
        }
        let r = y[i] - y_mean;
        for k in 0..p {
            let zk = s.z[(i, k)];
            b[k] += wi * zk * r;
            for l in 0..=k {
                a[(k, l)] += wi * zk * s.z[(i, l)];
            }
        }
    }
    for k in 0..p {
        for l in 0..k {
            a[(l, k)] = a[(k, l)];
        }
        a[(k, k)] += penalty;
    }
    let beta = spd_solve(a, b)?;
    Ok(s.to_model(x.ncols(), y_mean, &beta))
}

/// Penalized Bernoulli log-likelihood maximized by damped Newton steps.
/// Targets outside `[0, 1]` are clamped; fractional targets are allowed.
pub fn fit_logistic(x: &FeatureMatrix, y: &[f64], weights: Option<&[f64]>, penalty: f64) -> Result<LinearModel> {
    let n = x.nrows();
    let s = standardize(x, weights);
    let y: Vec<f64> = y.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let p = s.kept.len();
    let y_mean = (0..n).map(|i| s.w[i] * y[i]).sum::<f64>() / n as f64;
    let ym = y_mean.clamp(1e-9, 1.0 - 1e-9);
    // theta = (intercept, beta)
    let mut theta = DVector::zeros(p + 1);
    theta[0] = ln(ym / (1.0 - ym));

    let objective = |theta: &DVector<f64>| -> f64 {
        let mut ll = 0.0;
        for i in 0..n {
            let eta = eta_of(&s.z, i, theta);
            // log(1 + e^eta) computed stably
            let softplus = if eta > 0.0 { eta + ln(1.0 + crate::math::exp(-eta)) } else { ln(1.0 + crate::math::exp(eta)) };
            ll += s.w[i] * (y[i] * eta - softplus);
        }
        let pen: f64 = (1..=p).map(|k| theta[k] * theta[k]).sum();
        -ll + 0.5 * penalty * pen
    };

    let mut current = objective(&theta);
    for _ in 0..100 {
        let mut grad = DVector::zeros(p + 1);
        let mut hess = DMatrix::zeros(p + 1, p + 1);
        for i in 0..n {
            let wi = s.w[i];
            if wi == 0.0 {
                continue;
            }
            let mu = expit(eta_of(&s.z, i, &theta));
            let r = wi * (mu - y[i]);
            let v = wi * mu * (1.0 - mu);
            for k in 0..=p {
                let zk = if k == 0 { 1.0 } else { s.z[(i, k - 1)] };
                grad[k] += r * zk;
                for l in 0..=k {
                    let zl = if l == 0 { 1.0 } else { s.z[(i, l - 1)] };
                    hess[(k, l)] += v * zk * zl;
                }
            }
        }
        for k in 0..=p {
            for l in 0..k {
                hess[(l, k)] = hess[(k, l)];
            }
            if k > 0 {
                grad[k] += penalty * theta[k];
                hess[(k, k)] += penalty;
            }
        }
        // A small ridge on the Newton system keeps separated data from
        // producing an unsolvable step; the objective still decides.
        for k in 0..=p {
            hess[(k, k)] += 1e-12;
        }
        let step = match hess.cholesky() {
            Some(c) => c.solve(&grad),
            None => return Err(Error::SingularDesign),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &theta - &step * t;
            let value = objective(&candidate);
            if value <= current {
                let gain = current - value;
                theta = candidate;
                current = value;
                accepted = true;
                if gain <= 1e-14 * (1.0 + abs(current)) {
                    return Ok(s.to_model(x.ncols(), theta[0], &theta.rows(1, p).into_owned()));
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(s.to_model(x.ncols(), theta[0], &theta.rows(1, p).into_owned()))
}

fn eta_of(z: &DMatrix<f64>, i: usize, theta: &DVector<f64>) -> f64 {
    let mut eta = theta[0];
    for k in 0..z.ncols() {
        eta += theta[k + 1] * z[(i, k)];
    }
    eta
}
