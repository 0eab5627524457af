//! Smoothing gradient flow `ẋ = −∇ₓF̃(x, μ(t))`: forward Euler (the smoothing
//! gradient method itself), an adaptive Dormand–Prince 4(5) integrator, and the
//! continuous Lyapunov function and bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::dist_sq;
use crate::problem::{CompositeProblem, GradEvalCounter};
use crate::schedule::{exp_integral, MuDesign, Schedule};
use crate::solver::{fmt_f64, fmt_opt, run_sgm, SgmOptions, Trajectory};

pub const FLOW_CSV_HEADER: &str = "t,mu,f_true,lyapunov_v,bound_ct,grad_evals";

/// Forward Euler on the flow with `μ_k = μ(t_k)`. This is exactly
/// [`run_sgm`] on a continuous-driven schedule.
pub fn integrate_euler(
    p: &CompositeProblem,
    design: &MuDesign,
    t0: f64,
    x0: &[f64],
    opts: &SgmOptions,
) -> Result<Trajectory> {
    let sched = Schedule::ContinuousDriven {
        design: design.clone(),
        t0,
    };
    run_sgm(p, &sched, x0, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub mu: f64,
    pub f_true: f64,
    /// `V(t)`, present when the optimum is known.
    pub lyapunov_v: Option<f64>,
    /// Continuous bound on `F(x(t)) − F*`, present for `t > t₀` when the optimum is known.
    pub bound_ct: Option<f64>,
    /// Right-hand-side evaluations spent so far.
    pub grad_evals: u64,
}

pub fn write_flow_csv<W: std::io::Write>(samples: &[FlowSample], mut w: W) -> Result<()> {
    writeln!(w, "{FLOW_CSV_HEADER}")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.mu),
            fmt_f64(s.f_true),
            fmt_opt(s.lyapunov_v),
            fmt_opt(s.bound_ct),
            s.grad_evals
        )?;
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub const SAFETY: f64 = 0.9;
pub const MIN_FACTOR: f64 = 0.2;
pub const MAX_FACTOR: f64 = 5.0;
pub const INITIAL_STEP_FRACTION: f64 = 1e-2;
pub const MIN_STEP_FRACTION: f64 = 1e-14;

/// Accepted steps of a Dormand–Prince run.
#[derive(Debug, Clone, PartialEq)]
pub struct Rk45Output {
    /// Times of the initial point and of every accepted step.
    pub ts: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    /// Right-hand-side evaluations spent when each entry of `ts` was reached.
    pub evals: Vec<u64>,
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: u64,
}

/// Integrates `ẏ = f(t, y)` on `[t0, t_end]` with the Dormand–Prince pair
/// and an elementary error-per-step controller.
///
/// `f` writes the derivative into its third argument and may fail. The
/// first-same-as-last property means one evaluation for the start plus six
/// per attempted step.
pub fn dormand_prince<F>(
    mut f: F,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<Rk45Output>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integration interval [{t0}, {t_end}] is empty"
        )));
    }
    if !(rtol > 0.0) || !(atol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerances must be positive, got rtol={rtol}, atol={atol}"
        )));
    }
    let n = y0.len();
    let span = t_end - t0;
    let h_min = MIN_STEP_FRACTION * span;
    let mut h = INITIAL_STEP_FRACTION * span;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut rhs_evals = 0u64;

    f(t, &y, &mut k[0])?;
    rhs_evals += 1;

    let mut out = Rk45Output {
        ts: vec![t0],
        ys: vec![y.clone()],
        evals: vec![rhs_evals],
        accepted: 0,
        rejected: 0,
        rhs_evals: 0,
    };

    while t < t_end {
        let last = t + h >= t_end;
        let h_try = if last { t_end - t } else { h };
        for i in 1..7 {
            for (j, s) in stage.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (l, kl) in k.iter().enumerate().take(i) {
                    acc += A[i][l] * kl[j];
                }
                *s = y[j] + h_try * acc;
            }
            f(t + C[i] * h_try, &stage, &mut k[i])?;
            rhs_evals += 1;
            if i == 6 {
                y5.copy_from_slice(&stage);
            }
        }
        let mut err_sq = 0.0;
        for j in 0..n {
            let mut e = 0.0;
            for (i, ki) in k.iter().enumerate() {
                e += (B5[i] - B4[i]) * ki[j];
            }
            let scale = atol + rtol * y[j].abs().max(y5[j].abs());
            err_sq += (h_try * e / scale).powi(2);
        }
        let err = if n == 0 { 0.0 } else { (err_sq / n as f64).sqrt() };
        if !err.is_finite() {
            return Err(Error::NumericalDivergence { step: out.accepted + 1 });
        }
        let factor = if err == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        if err <= 1.0 {
            t = if last { t_end } else { t + h_try };
            std::mem::swap(&mut y, &mut y5);
            k.swap(0, 6);
            out.ts.push(t);
            out.ys.push(y.clone());
            out.evals.push(rhs_evals);
            out.accepted += 1;
            if !last {
                h = h_try * factor;
            }
        } else {
            out.rejected += 1;
            h = h_try * factor;
        }
        if t < t_end && h < h_min {
            return Err(Error::Stiffness { t, h });
        }
    }
    out.rhs_evals = rhs_evals;
    Ok(out)
}

/// Result of integrating the flow with [`integrate_rk45`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rk45Run {
    pub samples: Vec<FlowSample>,
    pub accepted: usize,
    pub rejected: usize,
    pub grad_evals: u64,
}

/// Integrates the flow from `(t0, x0)` to `t_end` with Dormand–Prince.
pub fn integrate_rk45(
    p: &CompositeProblem,
    design: &MuDesign,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<Rk45Run> {
    p.check_dim(x0)?;
    design.validate()?;
    for t in [t0, t_end] {
        let mu = design.value_at(t);
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::IllPosedInterval { t });
        }
    }
    let mut counter = GradEvalCounter::new();
    let rhs = |t: f64, x: &[f64], out: &mut [f64]| -> Result<()> {
        let mu = design.value_at(t);
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::IllPosedInterval { t });
        }
        let g = counter.smoothed_grad(p, x, mu)?;
        for (o, gi) in out.iter_mut().zip(g) {
            *o = -gi;
        }
        Ok(())
    };
    let res = dormand_prince(rhs, x0, t0, t_end, rtol, atol)?;

    let beta = p.params().beta;
    let sigma = p.sigma();
    let d2 = p.optimum().map(|xs| dist_sq(x0, xs));
    let mut samples = Vec::with_capacity(res.ts.len());
    for ((t, x), &grad_evals) in res.ts.iter().zip(res.ys).zip(&res.evals) {
        let mu = design.value_at(*t);
        let (lyapunov_v, bound_ct) = match d2 {
            Some(d2) => {
                let v = lyapunov_continuous(p, &x, *t, t0, sigma, beta, design)?;
                let b = if *t > t0 {
                    Some(bound_continuous(d2, beta, sigma, design, t0, *t)?)
                } else {
                    None
                };
                (Some(v), b)
            }
            None => (None, None),
        };
        samples.push(FlowSample {
            t: *t,
            f_true: p.true_value(&x),
            x,
            mu,
            lyapunov_v,
            bound_ct,
            grad_evals,
        });
    }
    Ok(Rk45Run {
        samples,
        accepted: res.accepted,
        rejected: res.rejected,
        grad_evals: res.rhs_evals,
    })
}

/// `I_σ(t) = ∫_{t₀}^{t} e^{σ(τ−t₀)} dτ`.
pub fn i_sigma(sigma: f64, t0: f64, t: f64) -> f64 {
    exp_integral(sigma, t - t0)
}

/// `V(t) = (e^{σ(t−t₀)}/2)‖x − x*‖² + I_σ(t)(F̃(x, μ(t)) + βμ(t) − F̃(x*, μ(t)))`.
pub fn lyapunov_continuous(
    p: &CompositeProblem,
    x: &[f64],
    t: f64,
    t0: f64,
    sigma: f64,
    beta: f64,
    design: &MuDesign,
) -> Result<f64> {
    let xs = p
        .optimum()
        .ok_or_else(|| Error::Unsupported("the Lyapunov function needs a known optimum".into()))?;
    p.check_dim(x)?;
    if t < t0 {
        return Err(Error::InvalidParameter(format!("t = {t} precedes t0 = {t0}")));
    }
    let mu = design.value_at(t);
    let gap = p.smoothed_value(x, mu)? + beta * mu - p.smoothed_value(xs, mu)?;
    Ok(0.5 * (sigma * (t - t0)).exp() * dist_sq(x, xs) + i_sigma(sigma, t0, t) * gap)
}

pub const SIMPSON_REL_TOL: f64 = 1e-8;
pub const SIMPSON_MAX_DEPTH: u32 = 40;

/// `∫_{t₀}^{t} e^{σ(τ−t₀)} μ(τ) dτ`, in closed form when available.
pub fn weighted_mu_integral(design: &MuDesign, sigma: f64, t0: f64, t: f64) -> f64 {
    if let Some(v) = design.weighted_integral_closed_form(sigma, t0, t) {
        return v;
    }
    let g = |tau: f64| (sigma * (tau - t0)).exp() * design.value_at(tau);
    adaptive_simpson(&g, t0, t, SIMPSON_REL_TOL)
}

/// `(½‖x₀ − x*‖² + β ∫ e^{σ(τ−t₀)} μ(τ) dτ) / I_σ(t)`.
pub fn bound_continuous(
    x0_dist_sq: f64,
    beta: f64,
    sigma: f64,
    design: &MuDesign,
    t0: f64,
    t: f64,
) -> Result<f64> {
    if !(t > t0) {
        return Err(Error::UndefinedBound(format!(
            "the continuous bound needs t > t0, got t = {t}, t0 = {t0}"
        )));
    }
    let integral = weighted_mu_integral(design, sigma, t0, t);
    Ok((0.5 * x0_dist_sq + beta * integral) / i_sigma(sigma, t0, t))
}

/// Adaptive Simpson quadrature to relative tolerance `rel_tol`.
pub fn adaptive_simpson<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = g(a);
    let fb = g(b);
    let m = 0.5 * (a + b);
    let fm = g(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Absolute target from a coarse magnitude estimate of the integral.
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    simpson_step(g, a, b, fa, fm, fb, whole, rel_tol * scale, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<G: Fn(f64) -> f64>(
    g: &G,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = g(lm);
    let frm = g(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(g, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_step(g, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Linearly interpolates the series `(ts, vs)` at `t`; `ts` must be sorted.
/// Values outside the range are clamped to the end points.
pub fn interpolate(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let n = ts.len();
    if n == 0 {
        return f64::NAN;
    }
    if t <= ts[0] {
        return vs[0];
    }
    if t >= ts[n - 1] {
        return vs[n - 1];
    }
    let i = ts.partition_point(|&x| x <= t);
    let (t0, t1) = (ts[i - 1], ts[i]);
    let w = (t - t0) / (t1 - t0);
    vs[i - 1] + w * (vs[i] - vs[i - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dormand_prince_exponential_decay() {
        for c in [1.0, 2.0, 10.0] {
            let rtol = 1e-6;
            let out = dormand_prince(
                |_, y, d| {
                    d[0] = -c * y[0];
                    Ok(())
                },
                &[1.0],
                0.0,
                1.0,
                rtol,
                1e-12,
            )
            .unwrap();
            assert_eq!(*out.ts.last().unwrap(), 1.0);
            let y = out.ys.last().unwrap()[0];
            assert_relative_eq!(y, (-c).exp(), max_relative = 10.0 * rtol);
            assert_eq!(out.rhs_evals, 1 + 6 * (out.accepted + out.rejected) as u64);
        }
    }

    #[test]
    fn dormand_prince_is_fifth_order_on_polynomials() {
        // ẏ = 4t³ has y = t⁴, integrated exactly by a fifth-order method.
        let out = dormand_prince(
            |t, _, d| {
                d[0] = 4.0 * t * t * t;
                Ok(())
            },
            &[0.0],
            0.0,
            2.0,
            1e-3,
            1e-6,
        )
        .unwrap();
        assert_relative_eq!(out.ys.last().unwrap()[0], 16.0, max_relative = 1e-13);
    }

    #[test]
    fn dormand_prince_rejects_bad_input() {
        let f = |_: f64, _: &[f64], _: &mut [f64]| Ok(());
        assert!(dormand_prince(f, &[1.0], 1.0, 1.0, 1e-3, 1e-6).is_err());
        assert!(dormand_prince(f, &[1.0], 0.0, 1.0, 0.0, 1e-6).is_err());
    }

    #[test]
    fn dormand_prince_reports_stiffness() {
        // Blows up in finite time at t = 1.
        let r = dormand_prince(
            |_, y, d| {
                d[0] = y[0] * y[0];
                Ok(())
            },
            &[1.0],
            0.0,
            2.0,
            1e-6,
            1e-9,
        );
        assert!(matches!(r, Err(Error::Stiffness { .. }) | Err(Error::NumericalDivergence { .. })));
    }

    #[test]
    fn simpson_matches_closed_forms() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-10);
        assert_relative_eq!(v, 2.0, max_relative = 1e-9);
        let d = MuDesign::Reciprocal { mu0: 1.0, power: 1.0, t0: 0.0 };
        // ∫₀³ 1/(1+τ) dτ = ln 4
        assert_relative_eq!(weighted_mu_integral(&d, 0.0, 0.0, 3.0), 4f64.ln(), max_relative = 1e-8);
        let e = MuDesign::Exponential { mu0: 1.0, gamma: 3.0, t0: 0.5 };
        let g = |tau: f64| (0.7 * (tau - 0.5)).exp() * e.value_at(tau);
        assert_relative_eq!(
            weighted_mu_integral(&e, 0.7, 0.5, 2.0),
            adaptive_simpson(&g, 0.5, 2.0, 1e-12),
            max_relative = 1e-10
        );
    }

    #[test]
    fn continuous_bound_constant_mu() {
        let d = MuDesign::Constant { mu0: 0.25 };
        let b = bound_continuous(2.0, 3.0, 0.0, &d, 1.0, 5.0).unwrap();
        assert_relative_eq!(b, 1.0 / 4.0 + 0.75);
        assert!(bound_continuous(2.0, 3.0, 0.0, &d, 1.0, 1.0).is_err());
    }

    #[test]
    fn i_sigma_limits() {
        assert_eq!(i_sigma(0.0, 1.0, 3.5), 2.5);
        assert_relative_eq!(i_sigma(1e-12, 0.0, 2.0), 2.0, max_relative = 1e-11);
        assert_relative_eq!(i_sigma(2.0, 0.0, 1.0), (2f64.exp() - 1.0) / 2.0);
    }

    #[test]
    fn interpolation() {
        let ts = [0.0, 1.0, 3.0];
        let vs = [0.0, 2.0, 0.0];
        assert_eq!(interpolate(&ts, &vs, 0.5), 1.0);
        assert_eq!(interpolate(&ts, &vs, 2.0), 1.0);
        assert_eq!(interpolate(&ts, &vs, -1.0), 0.0);
        assert_eq!(interpolate(&ts, &vs, 5.0), 0.0);
    }
}
