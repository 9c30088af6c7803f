//! Scalar helpers. Everything routes through `libm` so results do not depend
//! on whether `std` is linked.

use alloc::vec::Vec;

/// Normal quantile used for 95% Wald intervals.
pub const Z_975: f64 = 1.959964;

/// Floor applied to estimated probabilities before they are used as
/// denominators.
pub const PROB_FLOOR: f64 = 1e-6;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// Logistic function, evaluated without overflow for large |x|.
#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Weighted mean; `None` weights means equal weights.
pub fn mean(values: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        None => values.iter().sum::<f64>() / values.len() as f64,
        Some(w) => {
            let total: f64 = w.iter().sum();
            values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / total
        }
    }
}

/// Weighted population variance (denominator = total weight).
pub fn variance(values: &[f64], weights: Option<&[f64]>) -> f64 {
    let m = mean(values, weights);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    mean(&sq, weights)
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" estimator). Sorts `values` in place.
pub fn quantile_in_place(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let h = (values.len() - 1) as f64 * q;
    let lo = floor(h) as usize;
    if lo + 1 >= values.len() {
        return values[values.len() - 1];
    }
    values[lo] + (h - lo as f64) * (values[lo + 1] - values[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn expit_symmetry() {
        for x in [-800.0, -3.0, 0.0, 2.5, 800.0] {
            assert!((expit(x) + expit(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(expit(0.0), 0.5);
    }

    #[test]
    fn quantile_interpolates() {
        let mut v = vec![3.0, 1.0, 2.0, 4.0];
        // h = 3 * 0.5 = 1.5 -> 2 + 0.5 * (3 - 2)
        assert_eq!(quantile_in_place(&mut v, 0.5), 2.5);
        assert_eq!(quantile_in_place(&mut v, 1.0), 4.0);
        assert_eq!(quantile_in_place(&mut v, 0.0), 1.0);
    }
}
