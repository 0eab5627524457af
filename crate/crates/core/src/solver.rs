//! Smoothing gradient method `x_{k+1} = x_k − s_k ∇ₓF̃(x_k, μ_k)` with
//! Lyapunov monitoring and the discrete convergence bound.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm2};
use crate::problem::{CompositeProblem, GradEvalCounter};
use crate::schedule::{Schedule, ScheduleState};

pub const TRAJECTORY_CSV_HEADER: &str = "k,t,s,mu,f_tilde,f_true,grad_norm,lyapunov,bound,grad_evals";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub t: f64,
    pub s: f64,
    pub mu: f64,
    pub x: Vec<f64>,
    pub f_tilde: f64,
    pub f_true: f64,
    /// `‖∇ₓF̃(x_k, μ_k)‖`; absent on a final record whose gradient was never taken.
    pub grad_norm: Option<f64>,
    /// `V^{(k)}`, present when the optimum is known.
    pub lyapunov: Option<f64>,
    /// Discrete bound on `F(x_k) − F*`, present for `k ≥ 1` when the optimum is known.
    pub bound: Option<f64>,
    /// Gradient evaluations spent to reach `x_k`.
    pub grad_evals: u64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationStatus {
    BudgetExhausted,
    ScheduleExhausted,
    ToleranceMet,
}

impl TerminationStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationStatus::BudgetExhausted => "budget-exhausted",
            TerminationStatus::ScheduleExhausted => "schedule-exhausted",
            TerminationStatus::ToleranceMet => "tolerance-met",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub problem: String,
    pub schedule: String,
    pub status: TerminationStatus,
    /// Steps taken (equals the gradient evaluations spent).
    pub steps: usize,
    pub grad_evals: u64,
}

impl Trajectory {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("trajectory has at least one record")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.k,
                fmt_f64(r.t),
                fmt_f64(r.s),
                fmt_f64(r.mu),
                fmt_f64(r.f_tilde),
                fmt_f64(r.f_true),
                fmt_opt(r.grad_norm),
                fmt_opt(r.lyapunov),
                fmt_opt(r.bound),
                r.grad_evals
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Full double precision, 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgmOptions {
    pub max_steps: usize,
    pub grad_eval_budget: Option<u64>,
    /// Stop once `‖∇ₓF̃‖` falls to this value.
    pub tolerance: Option<f64>,
    /// Keep every `stride`-th record (plus the first and the last).
    pub stride: usize,
    /// Start time for schedules that do not carry their own.
    pub t0: f64,
    /// Stepsize factor `c` in `s_k = c/(L + α/μ_k)`. Bounds assume `c = 1`.
    pub step_scale: f64,
}

impl Default for SgmOptions {
    fn default() -> Self {
        Self {
            max_steps: 1000,
            grad_eval_budget: None,
            tolerance: None,
            stride: 1,
            t0: 1.0,
            step_scale: 1.0,
        }
    }
}

impl SgmOptions {
    pub fn with_steps(max_steps: usize) -> Self {
        Self {
            max_steps,
            ..Self::default()
        }
    }
}

/// Runs the smoothing gradient method from `x0`.
pub fn run_sgm(
    p: &CompositeProblem,
    sched: &Schedule,
    x0: &[f64],
    opts: &SgmOptions,
) -> Result<Trajectory> {
    p.check_dim(x0)?;
    if opts.max_steps == 0 {
        return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
    }
    if opts.stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let sigma = p.sigma();
    let lip = p.lipschitz();
    let params = p.params();
    let x0_dist_sq = p.optimum().map(|xs| dist_sq(x0, xs));
    let step_limit = match opts.grad_eval_budget {
        Some(b) => opts.max_steps.min(usize::try_from(b).unwrap_or(usize::MAX)),
        None => opts.max_steps,
    };

    let mut state = ScheduleState::initial_scaled(sched, opts.t0, lip, params.alpha, opts.step_scale)?;
    let mut x = x0.to_vec();
    let mut counter = GradEvalCounter::new();
    let mut records = Vec::new();

    let status = loop {
        let mut rec = make_record(p, &state, &x, x0_dist_sq, counter.count())?;
        if state.k >= step_limit {
            records.push(rec);
            break TerminationStatus::BudgetExhausted;
        }
        let next = match state.advance(sched, sigma, lip, params.alpha) {
            Ok(n) => n,
            Err(Error::ScheduleExhausted { .. }) => {
                records.push(rec);
                break TerminationStatus::ScheduleExhausted;
            }
            Err(e) => return Err(e),
        };
        let g = counter.smoothed_grad(p, &x, state.mu)?;
        let gn = norm2(&g);
        rec.grad_norm = Some(gn);
        if let Some(tol) = opts.tolerance {
            if gn <= tol {
                records.push(rec);
                break TerminationStatus::ToleranceMet;
            }
        }
        if state.k % opts.stride == 0 {
            records.push(rec);
        }
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= state.s * gi;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDivergence { step: next.k });
        }
        state = next;
    };

    Ok(Trajectory {
        records,
        problem: p.fingerprint(),
        schedule: sched.descriptor(),
        status,
        steps: state.k,
        grad_evals: counter.count(),
    })
}

fn make_record(
    p: &CompositeProblem,
    state: &ScheduleState,
    x: &[f64],
    x0_dist_sq: Option<f64>,
    grad_evals: u64,
) -> Result<IterationRecord> {
    let f_tilde = p.smoothed_value(x, state.mu)?;
    let f_true = p.true_value(x);
    let (lyapunov, bound) = match x0_dist_sq {
        Some(d2) => {
            let v = lyapunov_discrete(p, state, x)?;
            let b = if state.k >= 1 {
                Some(bound_discrete(state, d2, p.params().beta)?)
            } else {
                None
            };
            (Some(v), b)
        }
        None => (None, None),
    };
    Ok(IterationRecord {
        k: state.k,
        t: state.t,
        s: state.s,
        mu: state.mu,
        x: x.to_vec(),
        f_tilde,
        f_true,
        grad_norm: None,
        lyapunov,
        bound,
        grad_evals,
        eta: state.eta(),
    })
}

/// `V^{(k)} = (η_k/2)‖x − x*‖² + (Σ η s)(F̃(x, μ_k) + βμ_k − F̃(x*, μ_k))`.
pub fn lyapunov_discrete(p: &CompositeProblem, state: &ScheduleState, x: &[f64]) -> Result<f64> {
    let xs = p
        .optimum()
        .ok_or_else(|| Error::Unsupported("the Lyapunov function needs a known optimum".into()))?;
    p.check_dim(x)?;
    let beta = p.params().beta;
    let gap = p.smoothed_value(x, state.mu)? + beta * state.mu - p.smoothed_value(xs, state.mu)?;
    let (eta, sum_eta_s, _, log_scale) = state.scaled_sums();
    let scaled = 0.5 * eta * dist_sq(x, xs) + sum_eta_s * gap;
    Ok(scaled * log_scale.exp())
}

/// `(½‖x₀ − x*‖² + β Σ η_{κ+1} μ_κ s_κ) / Σ η_{κ+1} s_κ`.
pub fn bound_discrete(state: &ScheduleState, x0_dist_sq: f64, beta: f64) -> Result<f64> {
    if state.k == 0 {
        return Err(Error::UndefinedBound("the discrete bound needs k >= 1".into()));
    }
    let (_, sum_eta_s, sum_eta_mu_s, log_scale) = state.scaled_sums();
    Ok((0.5 * x0_dist_sq * (-log_scale).exp() + beta * sum_eta_mu_s) / sum_eta_s)
}

/// Closed-form bound for `σ = 0` and `μ_k = μ₀(k+1)^{−γ}`, `γ ∈ (0, 1]`.
pub fn closed_form_bound_nonstrongly(
    lipschitz: f64,
    alpha: f64,
    beta: f64,
    mu0: f64,
    gamma: f64,
    x0_dist_sq: f64,
    k: usize,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "closed-form bound needs gamma in (0, 1], got {gamma}"
        )));
    }
    if k == 0 {
        return Err(Error::UndefinedBound("the closed-form bound needs k >= 1".into()));
    }
    let kf = k as f64;
    let inv_l0 = 1.0 / (lipschitz + alpha / mu0);
    let c = beta * mu0 * mu0 / alpha;
    let half_d2 = 0.5 * x0_dist_sq;
    let (num, den) = if gamma == 1.0 {
        (half_d2 + c * (2.0 - 1.0 / kf), inv_l0 * (kf + 1.0).ln())
    } else if gamma == 0.5 {
        (half_d2 + c * (1.0 + kf.ln()), 2.0 * inv_l0 * ((kf + 1.0).sqrt() - 1.0))
    } else {
        let e = 1.0 - 2.0 * gamma;
        (
            half_d2 + c / e * (kf.powf(e) - 2.0 * gamma),
            inv_l0 / (1.0 - gamma) * ((kf + 1.0).powf(1.0 - gamma) - 1.0),
        )
    };
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::sqrt_l2_approx;
    use crate::linalg::Matrix;
    use crate::problem::quadratic_least_squares;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn abs_problem() -> CompositeProblem {
        let f = quadratic_least_squares(Matrix::zeros(1, 1).unwrap(), vec![0.0]).unwrap();
        CompositeProblem::new(Arc::new(f), Arc::new(sqrt_l2_approx(1).unwrap()))
            .unwrap()
            .with_optimum(vec![0.0])
            .unwrap()
    }

    #[test]
    fn records_and_counters_line_up() {
        let p = abs_problem();
        let sched = Schedule::PowerDecay { mu0: 1.0, gamma: 0.5 };
        let tr = run_sgm(&p, &sched, &[3.0], &SgmOptions::with_steps(50)).unwrap();
        assert_eq!(tr.status, TerminationStatus::BudgetExhausted);
        assert_eq!(tr.records.len(), 51);
        assert_eq!(tr.grad_evals, 50);
        for (i, r) in tr.records.iter().enumerate() {
            assert_eq!(r.k, i);
            assert_eq!(r.grad_evals, i as u64);
        }
        assert!(tr.records[0].bound.is_none());
        assert_relative_eq!(tr.records[0].lyapunov.unwrap(), 4.5);
        assert!(tr.last().grad_norm.is_none());
    }

    #[test]
    fn first_bound_by_substitution() {
        let p = abs_problem();
        let sched = Schedule::PowerDecay { mu0: 1.0, gamma: 0.5 };
        let tr = run_sgm(&p, &sched, &[3.0], &SgmOptions::with_steps(1)).unwrap();
        // σ = 0, k = 1: (½d² + βμ₀s₀)/s₀ with s₀ = μ₀ = 1.
        assert_relative_eq!(tr.records[1].bound.unwrap(), 4.5 + 1.0);
    }

    #[test]
    fn budget_and_stride() {
        let p = abs_problem();
        let sched = Schedule::PowerDecay { mu0: 1.0, gamma: 0.5 };
        let opts = SgmOptions {
            max_steps: 100,
            grad_eval_budget: Some(30),
            stride: 7,
            ..SgmOptions::default()
        };
        let tr = run_sgm(&p, &sched, &[3.0], &opts).unwrap();
        assert_eq!(tr.grad_evals, 30);
        let ks: Vec<usize> = tr.records.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 7, 14, 21, 28, 30]);
    }

    #[test]
    fn tolerance_stops_run() {
        let p = abs_problem();
        let sched = Schedule::PowerDecay { mu0: 1.0, gamma: 0.5 };
        let opts = SgmOptions {
            max_steps: 10_000,
            tolerance: Some(1e-3),
            ..SgmOptions::default()
        };
        let tr = run_sgm(&p, &sched, &[3.0], &opts).unwrap();
        assert_eq!(tr.status, TerminationStatus::ToleranceMet);
        assert!(tr.last().grad_norm.unwrap() <= 1e-3);
    }

    #[test]
    fn exhausted_schedule_is_a_status() {
        let p = abs_problem();
        let sched = Schedule::ExpDecay { mu0: 1.0, lambda: 0.5 };
        let tr = run_sgm(&p, &sched, &[3.0], &SgmOptions::with_steps(100_000)).unwrap();
        assert_eq!(tr.status, TerminationStatus::ScheduleExhausted);
        assert!(tr.steps < 1100);
    }

    #[test]
    fn lyapunov_zero_at_optimum() {
        let p = abs_problem();
        let sched = Schedule::Constant { mu0: 1.0 };
        let s = ScheduleState::initial(&sched, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(lyapunov_discrete(&p, &s, &[0.0]).unwrap(), 0.0);
        let f = quadratic_least_squares(Matrix::zeros(1, 1).unwrap(), vec![0.0]).unwrap();
        let q = CompositeProblem::new(Arc::new(f), Arc::new(sqrt_l2_approx(1).unwrap())).unwrap();
        assert!(matches!(lyapunov_discrete(&q, &s, &[0.0]), Err(Error::Unsupported(_))));
        assert!(matches!(bound_discrete(&s, 1.0, 1.0), Err(Error::UndefinedBound(_))));
    }

    #[test]
    fn closed_form_branches() {
        // γ = 1, k = 1: denominator (L + α/μ₀)^{-1} log 2.
        let v = closed_form_bound_nonstrongly(1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1).unwrap();
        assert_relative_eq!(v, (1.0 + 1.0) / (0.5 * 2f64.ln()));
        // γ = 1/2: α⁻¹βμ₀²(1 + log k) over 2(L + α/μ₀)⁻¹((k+1)^{1/2} − 1).
        let v = closed_form_bound_nonstrongly(0.0, 2.0, 3.0, 1.5, 0.5, 4.0, 8).unwrap();
        let expect = (2.0 + 3.0 * 2.25 / 2.0 * (1.0 + 8f64.ln())) / (2.0 * (1.5 / 2.0) * 2.0);
        assert_relative_eq!(v, expect, max_relative = 1e-14);
        assert!(closed_form_bound_nonstrongly(0.0, 1.0, 1.0, 1.0, 1.5, 1.0, 3).is_err());
        assert!(closed_form_bound_nonstrongly(0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn closed_form_is_continuous_near_half() {
        let at = |g: f64| closed_form_bound_nonstrongly(2.0, 1.0, 1.0, 1.0, g, 1.0, 1000).unwrap();
        assert_relative_eq!(at(0.5 - 1e-7), at(0.5), max_relative = 1e-5);
        assert_relative_eq!(at(0.5 + 1e-7), at(0.5), max_relative = 1e-5);
    }

    #[test]
    fn csv_header_and_empty_fields() {
        let p = abs_problem();
        let sched = Schedule::PowerDecay { mu0: 1.0, gamma: 0.5 };
        let csv = run_sgm(&p, &sched, &[3.0], &SgmOptions::with_steps(2)).unwrap().to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), 10);
        assert_eq!(first[8], "");
        let last: Vec<&str> = lines[3].split(',').collect();
        assert_eq!(last[6], "");
    }
}
