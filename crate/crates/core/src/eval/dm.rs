//! Diebold-Mariano test of equal predictive accuracy.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Test `E d_t = 0` for the loss differential `d_t = e1² − e2²` with a
/// Newey-West long-run variance using `h − 1` Bartlett-weighted lags and a
/// two-sided normal p-value.
pub fn dm_test(d: &[f64], h: usize) -> Result<DmResult> {
    if d.len() < 10 {
        return Err(Error::TooShort { needed: 10, got: d.len() });
    }
    if h == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite loss differential"));
    }
    if d.iter().all(|&v| v == 0.0) {
        return Ok(DmResult { statistic: 0.0, p_value: 1.0 });
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let autocov = |k: usize| (k..d.len()).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / n;
    let mut lrv = autocov(0);
    for k in 1..h.min(d.len()) {
        lrv += 2.0 * (1.0 - k as f64 / h as f64) * autocov(k);
    }
    if !(lrv > 0.0) {
        return Ok(if mean == 0.0 {
            DmResult { statistic: 0.0, p_value: 1.0 }
        } else {
            DmResult { statistic: mean.signum() * f64::INFINITY, p_value: 0.0 }
        });
    }
    let statistic = mean / (lrv / n).sqrt();
    let normal = Normal::standard();
    let p_value = (2.0 * (1.0 - normal.cdf(statistic.abs()))).clamp(0.0, 1.0);
    Ok(DmResult { statistic, p_value })
}

/// `***`, `**`, `*` at the 1%, 5% and 10% levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from, std_normal};

    #[test]
    fn identical_forecasts() {
        let r = dm_test(&[0.0; 20], 1).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn constant_nonzero_difference_is_boundary() {
        let r = dm_test(&[0.3; 20], 2).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert!(r.statistic > 0.0);
    }

    #[test]
    fn shifted_mean_is_detected() {
        let mut rng = rng_from(3);
        let d: Vec<f64> = (0..150).map(|_| 0.5 + std_normal(&mut rng)).collect();
        assert!(dm_test(&d, 1).unwrap().p_value < 0.01);
    }

    #[test]
    fn antisymmetric() {
        let mut rng = rng_from(4);
        let d: Vec<f64> = (0..60).map(|_| std_normal(&mut rng)).collect();
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        for h in 1..4 {
            let a = dm_test(&d, h).unwrap();
            let b = dm_test(&neg, h).unwrap();
            assert_eq!(a.statistic, -b.statistic);
            assert_eq!(a.p_value, b.p_value);
        }
    }

    #[test]
    fn hand_computed_statistic() {
        // mean 0.5, deviations ±0.5 → γ0 = 0.25, γ1 = −0.25 · 9/10
        let d: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let r1 = dm_test(&d, 1).unwrap();
        assert!((r1.statistic - 0.5 / (0.25f64 / 10.0).sqrt()).abs() < 1e-12);
        let lrv = 0.25 + 2.0 * 0.5 * (-0.225);
        let r2 = dm_test(&d, 2).unwrap();
        assert!((r2.statistic - 0.5 / (lrv / 10.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.004), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.5), "");
        assert!(dm_test(&[1.0; 5], 1).is_err());
    }
}
