//! Univariate effect-modification slopes from influence values.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{abs, sqrt};

/// OLS slope of the uncentered influence value on one covariate, with a
/// heteroskedasticity-robust (HC0) standard error. `None` when the
/// covariate has no variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub variable: String,
    pub slope: Option<f64>,
    pub se: Option<f64>,
}

/// Regresses `influence_i + estimate` on each covariate separately and
/// returns the slopes ordered by decreasing magnitude (undefined last).
pub fn effect_modification_slopes(influence: &[f64], estimate: f64, covariates: &[(String, Vec<f64>)]) -> Vec<Slope> {
    let n = influence.len() as f64;
    let y: Vec<f64> = influence.iter().map(|s| s + estimate).collect();
    let y_mean = y.iter().sum::<f64>() / n;
    let mut out: Vec<Slope> = covariates
        .iter()
        .map(|(name, x)| {
            let x_mean = x.iter().sum::<f64>() / n;
            let sxx: f64 = x.iter().map(|v| (v - x_mean) * (v - x_mean)).sum();
            let scale: f64 = x.iter().map(|v| v * v).sum::<f64>().max(1.0);
            if sxx <= 1e-14 * scale {
                return Slope { variable: name.clone(), slope: None, se: None };
            }
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - x_mean) * (b - y_mean)).sum();
            let b = sxy / sxx;
            let meat: f64 = x
                .iter()
                .zip(&y)
                .map(|(a, v)| {
                    let dx = a - x_mean;
                    let e = v - y_mean - b * dx;
                    dx * dx * e * e
                })
                .sum();
            Slope { variable: name.clone(), slope: Some(b), se: Some(sqrt(meat) / sxx) }
        })
        .collect();
    out.sort_by(|a, b| match (a.slope, b.slope) {
        (Some(x), Some(y)) => abs(y).total_cmp(&abs(x)),
        (Some(_), None) => core::cmp::Ordering::Less,
        (None, Some(_)) => core::cmp::Ordering::Greater,
        (None, None) => core::cmp::Ordering::Equal,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn slopes_scale_and_sort() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let s: Vec<f64> = x.iter().map(|v| 3.0 * v - 13.5).collect();
        let covs = vec![
            ("flat".into(), vec![1.0; 10]),
            ("x".into(), x.clone()),
            ("x_scaled".into(), x.iter().map(|v| 4.0 * v).collect()),
        ];
        let out = effect_modification_slopes(&s, 0.5, &covs);
        assert_eq!(out[0].variable, "x");
        assert!((out[0].slope.unwrap() - 3.0).abs() < 1e-12);
        assert!((out[1].slope.unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(out[2].slope, None);
    }
}
