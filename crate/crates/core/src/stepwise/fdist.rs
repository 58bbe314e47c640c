//! F statistic and its upper-tail probability.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-12;
const CF_MAX_TERMS: usize = 10_000;
const CF_TINY: f64 = 1e-300;

/// Partial F statistic for nested least squares models.
///
/// `((rss_reduced - rss_full) / extra_params) / (rss_full / residual_df_full)`,
/// which is `+inf` when the full model fits exactly and the reduced one
/// does not.
pub fn f_statistic(
    rss_reduced: f64,
    rss_full: f64,
    extra_params: usize,
    residual_df_full: usize,
) -> Result<f64> {
    if extra_params == 0 || residual_df_full == 0 {
        return Err(Error::InvalidDegreesOfFreedom(format!(
            "extra_params = {extra_params}, residual_df = {residual_df_full}; both must be >= 1"
        )));
    }
    if !(rss_full >= 0.0 && rss_reduced >= rss_full) {
        return Err(Error::InvalidConfig(format!(
            "need rss_reduced >= rss_full >= 0, got {rss_reduced} and {rss_full}"
        )));
    }
    Ok(partial_f(rss_reduced - rss_full, rss_full, extra_params, residual_df_full))
}

pub(crate) fn partial_f(reduction: f64, rss_full: f64, extra: usize, df: usize) -> f64 {
    if reduction <= 0.0 {
        0.0
    } else if rss_full <= 0.0 {
        f64::INFINITY
    } else {
        (reduction / extra as f64) / (rss_full / df as f64)
    }
}

/// Upper-tail probability `P(X > f)` for `X ~ F(df1, df2)`.
pub fn f_pvalue(f: f64, df1: usize, df2: usize) -> Result<f64> {
    if df1 == 0 || df2 == 0 {
        return Err(Error::InvalidDegreesOfFreedom(format!("df1 = {df1}, df2 = {df2}; both must be >= 1")));
    }
    if !(f >= 0.0) {
        return Err(Error::InvalidConfig(format!("F statistic must be nonnegative, got {f}")));
    }
    if f == f64::INFINITY {
        return Ok(0.0);
    }
    let (d1, d2) = (df1 as f64, df2 as f64);
    let x = d2 / (d2 + d1 * f);
    Ok(regularized_beta(x, d2 / 2.0, d1 / 2.0).clamp(0.0, 1.0))
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub(crate) fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let front = ln_front.exp();
    // the continued fraction converges fast on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn statistic_values() {
        assert_eq!(f_statistic(10.0, 5.0, 1, 8).unwrap(), 8.0);
        assert_eq!(f_statistic(3.0, 3.0, 2, 8).unwrap(), 0.0);
        assert_eq!(f_statistic(1.0, 0.0, 1, 8).unwrap(), f64::INFINITY);
        assert_eq!(f_statistic(0.0, 0.0, 1, 8).unwrap(), 0.0);
    }

    #[test]
    fn statistic_errors() {
        assert!(matches!(f_statistic(10.0, 5.0, 0, 8), Err(Error::InvalidDegreesOfFreedom(_))));
        assert!(matches!(f_statistic(10.0, 5.0, 1, 0), Err(Error::InvalidDegreesOfFreedom(_))));
        assert!(f_statistic(4.0, 5.0, 1, 3).is_err());
        assert!(f_pvalue(1.0, 0, 3).is_err());
        assert!(f_pvalue(-1.0, 2, 3).is_err());
        assert!(f_pvalue(f64::NAN, 2, 3).is_err());
    }

    #[test]
    fn pvalue_anchors() {
        assert_eq!(f_pvalue(0.0, 3, 7).unwrap(), 1.0);
        assert_eq!(f_pvalue(f64::INFINITY, 3, 7).unwrap(), 0.0);
        for n in 1..12 {
            assert!((f_pvalue(1.0, n, n).unwrap() - 0.5).abs() < 1e-12, "n = {n}");
        }
        let p = f_pvalue(8.0, 1, 8).unwrap();
        assert!((p - 0.0222039041404773).abs() < 1e-12, "{p}");
    }

    #[test]
    fn beta_closed_forms() {
        // I_x(1, 1) = x and I_x(a, 1) = x^a
        assert!((regularized_beta(0.3, 1.0, 1.0) - 0.3).abs() < 1e-14);
        assert!((regularized_beta(0.6, 2.5, 1.0) - 0.6f64.powf(2.5)).abs() < 1e-13);
        // I_x(1, b) = 1 - (1 - x)^b
        assert!((regularized_beta(0.2, 1.0, 3.0) - (1.0 - 0.8f64.powi(3))).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn pvalue_decreases_in_f(df1 in 1usize..30, df2 in 1usize..30, f in 0.0f64..20.0, bump in 0.01f64..5.0) {
            let lo = f_pvalue(f, df1, df2).unwrap();
            let hi = f_pvalue(f + bump, df1, df2).unwrap();
            prop_assert!((0.0..=1.0).contains(&lo));
            prop_assert!(hi <= lo);
        }
    }
}
