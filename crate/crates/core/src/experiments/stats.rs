//! Exceedance probabilities and log-log rate fits.

use log::warn;

use super::errors::ErrorReport;
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score half-width of a 95% interval for a binomial proportion.
pub fn binomial_half_width(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let n = n as f64;
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Empirical `P[E^M ≥ C k^r]` at one level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exceedance {
    pub level: usize,
    pub k: f64,
    pub c: f64,
    pub r: f64,
    pub fraction: f64,
    pub ci_half_width: f64,
    pub exceeding: usize,
    pub paths: usize,
    /// Failed paths, all counted as exceeding.
    pub blown_up: usize,
}

pub fn estimate_exceedance(report: &ErrorReport, c: f64, r: f64) -> Exceedance {
    let k = report.level.k;
    let threshold = c * k.powf(r);
    let exceeding = report
        .paths
        .iter()
        .filter(|p| p.em().is_none_or(|e| e.is_nan() || e >= threshold))
        .count();
    let n = report.paths.len();
    let fraction = if n == 0 {
        f64::NAN
    } else {
        exceeding as f64 / n as f64
    };
    Exceedance {
        level: report.level.level,
        k,
        c,
        r,
        fraction,
        ci_half_width: binomial_half_width(fraction, n),
        exceeding,
        paths: n,
        blown_up: report.blown_up(),
    }
}

/// Linear regression of `log response` on `log k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub levels: Vec<f64>,
    pub responses: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

/// Least-squares slope of `log responses` against `log levels`. Points with a
/// nonpositive or non-finite value are dropped with a warning.
pub fn fit_rate(levels: &[f64], responses: &[f64]) -> Result<RateFit> {
    if levels.len() != responses.len() {
        return Err(Error::param(
            "responses",
            format!("{} levels but {} responses", levels.len(), responses.len()),
        ));
    }
    let (mut ks, mut ys) = (Vec::new(), Vec::new());
    for (&k, &y) in levels.iter().zip(responses) {
        if k > 0.0 && y > 0.0 && k.is_finite() && y.is_finite() {
            ks.push(k);
            ys.push(y);
        } else {
            warn!("dropping point (k = {k}, response = {y}) from rate fit");
        }
    }
    if ks.len() < 3 {
        return Err(Error::InsufficientLevels {
            needed: 3,
            got: ks.len(),
        });
    }
    let x: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let y: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::param("levels", "all step sizes are equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(RateFit {
        levels: ks,
        responses: ys,
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// Median by sorting; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::errors::{ErrorTerms, LevelInfo, PathErrors};
    use proptest::prelude::*;

    fn report(values: &[f64]) -> ErrorReport {
        ErrorReport {
            level: LevelInfo {
                level: 1,
                steps: 16,
                k: 0.25,
                eps: 0.5,
            },
            paths: values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    PathErrors::ok(
                        i as u64,
                        ErrorTerms {
                            max_term: v,
                            grad_term: 0.0,
                            pressure_term: 0.0,
                        },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn exceedance_limits() {
        let r = report(&[0.1, 0.2, 0.3]);
        assert_eq!(estimate_exceedance(&r, f64::INFINITY, 0.2).fraction, 0.0);
        assert_eq!(estimate_exceedance(&r, 0.0, 0.2).fraction, 1.0);
    }

    #[test]
    fn exceedance_hand_count() {
        // threshold 0.8 · 0.25^0.5 = 0.4; values on and above it count
        let r = report(&[0.1, 0.39, 0.4, 0.41, 2.0]);
        let e = estimate_exceedance(&r, 0.8, 0.5);
        assert_eq!(e.exceeding, 3);
        assert_eq!(e.fraction, 0.6);
        assert_eq!(e.paths, 5);
        let mut r = r;
        r.paths.push(PathErrors::failed(
            9,
            Error::BlowUp {
                growth: 1e4,
                guard: 1e3,
            },
        ));
        let e = estimate_exceedance(&r, 0.8, 0.5);
        assert_eq!((e.exceeding, e.blown_up), (4, 1));
    }

    #[test]
    fn wilson_width_oracle() {
        // z = 1.96 approx., p = 0.5, n = 100: (z / (1 + z²/100)) sqrt(0.0025 + z²/40000)
        let z = Z95;
        let want = z / (1.0 + z * z / 100.0) * (0.0025 + z * z / 40000.0f64).sqrt();
        assert!((binomial_half_width(0.5, 100) - want).abs() < 1e-16);
        assert!(binomial_half_width(0.0, 10) > 0.0);
        assert!((binomial_half_width(0.5, 100) - 0.0965).abs() < 1e-3);
    }

    #[test]
    fn synthetic_slopes() {
        let ks = [0.5, 0.25, 0.125, 0.0625];
        for (c, r) in [(3.0, 1.0), (0.7, 0.25)] {
            let ys: Vec<f64> = ks.iter().map(|k: &f64| c * k.powf(r)).collect();
            let fit = fit_rate(&ks, &ys).unwrap();
            assert!((fit.slope - r).abs() <= 1e-12);
            assert!((fit.intercept - f64::ln(c)).abs() <= 1e-12);
            assert!(fit.residual <= 1e-12);
        }
    }

    #[test]
    fn three_point_normal_equations() {
        // x = ln k = (0, 1, 2) after choosing k = (1, e, e²); y = ln r = (0, 1, 3)
        // slope = Σ(x-1)(y-4/3)/Σ(x-1)² = 3/2, intercept = 4/3 - 3/2 = -1/6
        let e = std::f64::consts::E;
        let fit = fit_rate(&[1.0, e, e * e], &[1.0, e, e.powi(3)]).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-14);
        assert!((fit.intercept + 1.0 / 6.0).abs() < 1e-14);
        // residuals (1/6, -1/3, 1/6) → rms sqrt(1/18)
        assert!((fit.residual - (1.0f64 / 18.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_points_are_dropped() {
        let ks = [0.5, 0.25, 0.125, 0.0625];
        let fit = fit_rate(&ks, &[1.0, 0.0, 0.25, 0.125]).unwrap();
        assert_eq!(fit.levels, vec![0.5, 0.125, 0.0625]);
        assert!(matches!(
            fit_rate(&ks, &[1.0, -1.0, f64::NAN, 2.0]),
            Err(Error::InsufficientLevels { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn order_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(quantile(&[5.0, 1.0, 3.0], 1.0), 5.0);
    }

    proptest! {
        #[test]
        fn exceedance_is_monotone_in_c(values in prop::collection::vec(0.0f64..10.0, 1..40),
                                       c1 in 0.0f64..20.0, dc in 0.0f64..20.0) {
            let r = report(&values);
            let lo = estimate_exceedance(&r, c1, 0.2).fraction;
            let hi = estimate_exceedance(&r, c1 + dc, 0.2).fraction;
            prop_assert!(hi <= lo);
            prop_assert!((0.0..=1.0).contains(&lo));
        }
    }
}
