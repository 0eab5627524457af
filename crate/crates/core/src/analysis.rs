//! Timeline sandwich bounds for the stepsize rule `s_k = 1/(L + α/μ_k)` and
//! empirical convergence-rate fits.

use serde::Serialize;

use crate::error::{Error, Result};

/// Bounds on the elapsed time `t_k − t₀`, the smoothing parameter `μ(t_k)`
/// and, for power decay, the step index `k` given the elapsed time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineBounds {
    pub k: usize,
    /// Lower bound on `t_k − t₀`.
    pub t_lower: f64,
    /// Upper bound on `t_k − t₀`.
    pub t_upper: f64,
    pub mu_lower: f64,
    pub mu_upper: f64,
    pub k_lower: Option<f64>,
    pub k_upper: Option<f64>,
}

fn check_common(alpha: f64, mu0: f64, k: usize) -> Result<()> {
    if !(alpha > 0.0) || !(mu0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha and mu0 must be positive, got alpha={alpha}, mu0={mu0}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("timeline bounds need k >= 1".into()));
    }
    Ok(())
}

/// Bounds for `μ_k = μ₀ λ^k`. The `μ` lines are evaluated at the observed
/// elapsed time `elapsed = t_k − t₀`.
pub fn timeline_bounds_exponential(
    lipschitz: f64,
    alpha: f64,
    mu0: f64,
    lambda: f64,
    k: usize,
    elapsed: f64,
) -> Result<TimelineBounds> {
    check_common(alpha, mu0, k)?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    let l0 = lipschitz + alpha / mu0;
    let a0 = alpha / mu0;
    let geom = -((k as f64) * lambda.ln()).exp_m1() / (1.0 - lambda);
    Ok(TimelineBounds {
        k,
        t_lower: geom / l0,
        t_upper: geom / a0,
        mu_lower: mu0 - (mu0 * lipschitz + alpha) * (1.0 - lambda) * elapsed,
        mu_upper: mu0 - alpha * (1.0 - lambda) * elapsed,
        k_lower: None,
        k_upper: None,
    })
}

/// Bounds for `μ_k = μ₀ (k+1)^{−γ}` in the three regimes `γ < 1`, `γ = 1`
/// and `γ > 1`. The `k` and `μ` lines use the observed `elapsed = t_k − t₀`.
pub fn timeline_bounds_power(
    lipschitz: f64,
    alpha: f64,
    mu0: f64,
    gamma: f64,
    k: usize,
    elapsed: f64,
) -> Result<TimelineBounds> {
    check_common(alpha, mu0, k)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let l0 = lipschitz + alpha / mu0;
    let a0 = alpha / mu0;
    let kf = k as f64;
    let tau = elapsed;
    let b = if gamma == 1.0 {
        let k_lo = (a0 * tau - 1.0).exp();
        TimelineBounds {
            k,
            t_lower: (kf + 1.0).ln() / l0,
            t_upper: (1.0 + kf.ln()) / a0,
            mu_lower: mu0 * (-l0 * tau).exp(),
            mu_upper: mu0 / (k_lo + 1.0),
            k_lower: Some(k_lo),
            k_upper: Some((l0 * tau).exp_m1()),
        }
    } else if gamma < 1.0 {
        let e = 1.0 - gamma;
        let k_lo = (a0 * e * tau + gamma).powf(1.0 / e);
        let k_hi_base = l0 * e * tau + 1.0;
        TimelineBounds {
            k,
            t_lower: ((kf + 1.0).powf(e) - 1.0) / (l0 * e),
            t_upper: (kf.powf(e) - gamma) / (a0 * e),
            mu_lower: mu0 * k_hi_base.powf(-gamma / e),
            mu_upper: mu0 * (k_lo + 1.0).powf(-gamma),
            k_lower: Some(k_lo),
            k_upper: Some(k_hi_base.powf(1.0 / e) - 1.0),
        }
    } else {
        let e = gamma - 1.0;
        let k_lo = (gamma - a0 * e * tau).powf(-1.0 / e);
        // Past τ = 1/(l0 (γ−1)) the lower time line no longer constrains k.
        let k_hi_base = 1.0 - l0 * e * tau;
        let (mu_lower, k_upper) = if k_hi_base > 0.0 {
            (mu0 * k_hi_base.powf(gamma / e), k_hi_base.powf(-1.0 / e) - 1.0)
        } else {
            (0.0, f64::INFINITY)
        };
        TimelineBounds {
            k,
            t_lower: (1.0 - (kf + 1.0).powf(-e)) / (l0 * e),
            t_upper: (gamma - kf.powf(-e)) / (a0 * e),
            mu_lower,
            mu_upper: mu0 * (k_lo + 1.0).powf(-gamma),
            k_lower: Some(k_lo),
            k_upper: Some(k_upper),
        }
    };
    Ok(b)
}

/// Supremum of `t_k − t₀` over all `k` for `γ > 1`; infinite otherwise.
pub fn power_time_horizon(alpha: f64, mu0: f64, gamma: f64) -> f64 {
    if gamma > 1.0 {
        gamma / ((alpha / mu0) * (gamma - 1.0))
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `log v = c + p log k`.
    Power,
    /// `log v − log log k = c + p log k`.
    PowerLog,
    /// `v = c + p / log k`.
    InvLog,
}

impl RateModel {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "power" => Ok(RateModel::Power),
            "power_log" | "power-log" => Ok(RateModel::PowerLog),
            "inv_log" | "inv-log" => Ok(RateModel::InvLog),
            other => Err(Error::Config(format!("unknown rate model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    /// Fitted slope in the transformed coordinates.
    pub exponent: f64,
    pub intercept: f64,
    pub log_factor: bool,
    /// RMS residual. For the power models this is in log coordinates; for
    /// `InvLog` it is the RMS of `(v − fit)/v`, which is comparable.
    pub residual: f64,
    pub window: (f64, f64),
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares rate fit of `series` restricted to `window.0 ≤ k ≤ window.1`.
pub fn fit_rate(series: &[(f64, f64)], model: RateModel, window: (f64, f64)) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(k, _)| k >= window.0 && k <= window.1)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidSeries(format!(
            "window [{}, {}] holds {} points, need at least {MIN_FIT_POINTS}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some(&(k, v)) = pts.iter().find(|&&(k, v)| !(v > 0.0) || !v.is_finite() || !(k > 0.0)) {
        return Err(Error::InvalidSeries(format!("non-positive point (k={k}, value={v}) in window")));
    }
    let needs_log_k_pos = matches!(model, RateModel::PowerLog | RateModel::InvLog);
    if needs_log_k_pos {
        if let Some(&(k, _)) = pts.iter().find(|&&(k, _)| k <= 1.0) {
            return Err(Error::InvalidSeries(format!(
                "log-corrected models need k > 1, window contains k={k}"
            )));
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .map(|&(k, v)| match model {
            RateModel::Power => (k.ln(), v.ln()),
            RateModel::PowerLog => (k.ln(), v.ln() - k.ln().ln()),
            RateModel::InvLog => (1.0 / k.ln(), v),
        })
        .unzip();
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let n = xs.len() as f64;
    let sq: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            match model {
                RateModel::InvLog => (r / y).powi(2),
                _ => r * r,
            }
        })
        .sum();
    Ok(RateFit {
        model,
        exponent: slope,
        intercept,
        log_factor: model == RateModel::PowerLog,
        residual: (sq / n).sqrt(),
        window,
        points: pts.len(),
    })
}

fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

/// `k` values spaced evenly in `log k` between `lo` and `hi`, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (a, b) = ((lo.max(1) as f64).ln(), (hi.max(1) as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let f = if count <= 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            (a + f * (b - a)).exp().round() as usize
        })
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_coefficients_coincide() {
        for k in [1, 5, 40] {
            let b = timeline_bounds_exponential(0.0, 1.0, 1.0, 0.5, k, 0.0).unwrap();
            let expect = 2.0 * (1.0 - 0.5f64.powi(k as i32));
            assert_relative_eq!(b.t_lower, expect, max_relative = 1e-15);
            assert_relative_eq!(b.t_upper, expect, max_relative = 1e-15);
        }
        let far = timeline_bounds_exponential(0.0, 1.0, 1.0, 0.9, 100_000, 0.0).unwrap();
        assert_relative_eq!(far.t_upper, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn power_gamma_one_lines() {
        let (l, a, m) = (2.0, 1.0, 1.0);
        let b = timeline_bounds_power(l, a, m, 1.0, 9, 1.5).unwrap();
        assert_relative_eq!(b.t_lower, 10f64.ln() / 3.0);
        assert_relative_eq!(b.t_upper, 1.0 + 9f64.ln());
        assert_relative_eq!(b.k_lower.unwrap(), (0.5f64).exp());
        assert_relative_eq!(b.k_upper.unwrap(), (4.5f64).exp() - 1.0);
        assert_relative_eq!(b.mu_lower, (-4.5f64).exp());
    }

    #[test]
    fn power_gamma_two_has_finite_horizon() {
        let h = power_time_horizon(1.0, 1.0, 2.0);
        for k in [1, 10, 1000, 1_000_000] {
            let b = timeline_bounds_power(0.0, 1.0, 1.0, 2.0, k, 0.0).unwrap();
            assert!(b.t_upper.is_finite() && b.t_upper < h);
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(timeline_bounds_exponential(0.0, 1.0, 1.0, 1.0, 3, 0.0).is_err());
        assert!(timeline_bounds_exponential(0.0, 1.0, 1.0, 0.5, 0, 0.0).is_err());
        assert!(timeline_bounds_power(0.0, 1.0, 1.0, 0.0, 3, 0.0).is_err());
        assert!(timeline_bounds_power(0.0, 1.0, 1.0, -1.0, 3, 0.0).is_err());
    }

    #[test]
    fn fit_exact_models() {
        let ks: Vec<f64> = (2..=200).map(|k| k as f64).collect();
        let pow: Vec<(f64, f64)> = ks.iter().map(|&k| (k, k.powf(-0.5))).collect();
        let f = fit_rate(&pow, RateModel::Power, (2.0, 200.0)).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-6 && f.residual < 1e-9);

        let pl: Vec<(f64, f64)> = ks.iter().map(|&k| (k, k.powf(-0.5) * k.ln())).collect();
        let f = fit_rate(&pl, RateModel::PowerLog, (2.0, 200.0)).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-3 && f.residual < 1e-9);
        assert!(f.log_factor);

        let il: Vec<(f64, f64)> = ks.iter().map(|&k| (k, 0.1 + 3.0 / k.ln())).collect();
        let f = fit_rate(&il, RateModel::InvLog, (2.0, 200.0)).unwrap();
        assert!((f.exponent - 3.0).abs() < 1e-9 && f.residual < 1e-9);
    }

    #[test]
    fn fit_rejects_bad_series() {
        let few: Vec<(f64, f64)> = (1..5).map(|k| (k as f64, 1.0)).collect();
        assert!(matches!(fit_rate(&few, RateModel::Power, (1.0, 5.0)), Err(Error::InvalidSeries(_))));
        let mut s: Vec<(f64, f64)> = (1..50).map(|k| (k as f64, 1.0)).collect();
        s[20].1 = 0.0;
        assert!(matches!(fit_rate(&s, RateModel::Power, (1.0, 50.0)), Err(Error::InvalidSeries(_))));
        let ones: Vec<(f64, f64)> = (1..50).map(|k| (k as f64, 1.0)).collect();
        assert!(fit_rate(&ones, RateModel::InvLog, (1.0, 50.0)).is_err());
    }

    #[test]
    fn log_spacing() {
        let ks = log_spaced(100, 10_000, 50);
        assert_eq!(ks[0], 100);
        assert_eq!(*ks.last().unwrap(), 10_000);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
    }
}
