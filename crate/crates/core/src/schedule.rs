//! Smoothing-parameter schedules, stepsizes `s_k = 1/(L + α/μ_k)` and the
//! running sums and `η_k` weights consumed by the convergence bounds.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest smoothing parameter a run accepts before it is declared exhausted.
pub const MU_FLOOR: f64 = 1e-300;

/// `η` is rescaled once its stored mantissa exceeds `e^30`.
const ETA_RESCALE_LOG: f64 = 30.0;

/// Continuous-time smoothing parameter `μ(t)`.
#[derive(Clone)]
pub enum MuDesign {
    /// `μ(t) = μ₀ − c (t − t₀)`; reaches zero at `t₀ + μ₀/c`.
    Linear { mu0: f64, rate: f64, t0: f64 },
    /// `μ(t) = μ₀ e^{−γ (t − t₀)}`.
    Exponential { mu0: f64, gamma: f64, t0: f64 },
    /// `μ(t) = μ₀ (1 + (t − t₀))^{−p}`.
    Reciprocal { mu0: f64, power: f64, t0: f64 },
    /// `μ(t) = μ₀`.
    Constant { mu0: f64 },
    /// Any user function; it should be positive and non-increasing.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for MuDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MuDesign::Linear { mu0, rate, t0 } => {
                write!(f, "Linear {{ mu0: {mu0}, rate: {rate}, t0: {t0} }}")
            }
            MuDesign::Exponential { mu0, gamma, t0 } => {
                write!(f, "Exponential {{ mu0: {mu0}, gamma: {gamma}, t0: {t0} }}")
            }
            MuDesign::Reciprocal { mu0, power, t0 } => {
                write!(f, "Reciprocal {{ mu0: {mu0}, power: {power}, t0: {t0} }}")
            }
            MuDesign::Constant { mu0 } => write!(f, "Constant {{ mu0: {mu0} }}"),
            MuDesign::Custom(_) => write!(f, "Custom(<fn>)"),
        }
    }
}

impl MuDesign {
    /// Checks the design parameters.
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        let fin = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
            }
        };
        match *self {
            MuDesign::Linear { mu0, rate, t0 } => {
                pos("mu0", mu0)?;
                fin("t0", t0)?;
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "linear rate must be non-negative, got {rate}"
                    )));
                }
                Ok(())
            }
            MuDesign::Exponential { mu0, gamma, t0 } => {
                pos("mu0", mu0)?;
                fin("t0", t0)?;
                pos("gamma", gamma)
            }
            MuDesign::Reciprocal { mu0, power, t0 } => {
                pos("mu0", mu0)?;
                fin("t0", t0)?;
                pos("power", power)
            }
            MuDesign::Constant { mu0 } => pos("mu0", mu0),
            MuDesign::Custom(_) => Ok(()),
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match *self {
            MuDesign::Linear { mu0, rate, t0 } => mu0 - rate * (t - t0),
            MuDesign::Exponential { mu0, gamma, t0 } => mu0 * (-gamma * (t - t0)).exp(),
            MuDesign::Reciprocal { mu0, power, t0 } => mu0 * (1.0 + (t - t0)).powf(-power),
            MuDesign::Constant { mu0 } => mu0,
            MuDesign::Custom(ref f) => f(t),
        }
    }

    /// `μ(t + dt)` given `μ(t)`.
    ///
    /// Linear and exponential designs are advanced incrementally. Evaluating
    /// `μ₀ − c (t − t₀)` directly loses all relative accuracy once `μ` is
    /// small compared with `μ₀`, while `μ − c·dt` keeps it.
    pub fn next(&self, mu_t: f64, t_new: f64, dt: f64) -> f64 {
        match *self {
            MuDesign::Linear { rate, .. } => mu_t - rate * dt,
            MuDesign::Exponential { gamma, .. } => mu_t * (-gamma * dt).exp(),
            _ => self.value_at(t_new),
        }
    }

    /// `∫_{t₀}^{t} e^{σ(τ−t₀)} μ(τ) dτ` in closed form, when one is known.
    pub fn weighted_integral_closed_form(&self, sigma: f64, t0: f64, t: f64) -> Option<f64> {
        let span = t - t0;
        match *self {
            MuDesign::Constant { mu0 } => Some(mu0 * exp_integral(sigma, span)),
            MuDesign::Exponential { mu0, gamma, t0: td } => {
                let scale = mu0 * (-gamma * (t0 - td)).exp();
                Some(scale * exp_integral(sigma - gamma, span))
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MuDesign::Linear { .. } => "linear",
            MuDesign::Exponential { .. } => "exponential",
            MuDesign::Reciprocal { .. } => "reciprocal",
            MuDesign::Constant { .. } => "constant",
            MuDesign::Custom(_) => "custom",
        }
    }
}

/// `∫₀^T e^{c u} du`, accurate for small `c·T`.
pub fn exp_integral(c: f64, span: f64) -> f64 {
    if c == 0.0 {
        span
    } else {
        (c * span).exp_m1() / c
    }
}

/// Rule producing the smoothing parameters `μ_k`.
#[derive(Debug, Clone)]
pub enum Schedule {
    /// `μ_k = μ₀ (k+1)^{−γ}`.
    PowerDecay { mu0: f64, gamma: f64 },
    /// `μ_k = μ₀ λ^k`.
    ExpDecay { mu0: f64, lambda: f64 },
    /// `μ_k = μ₀` (test schedule; the bound then stalls at `βμ₀`).
    Constant { mu0: f64 },
    /// `μ_k = μ(t_k)` with `t_{k+1} = t_k + s_k`, starting at `t0`.
    ContinuousDriven { design: MuDesign, t0: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let check_mu0 = |mu0: f64| {
            if mu0 > 0.0 && mu0.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("mu0 must be positive, got {mu0}")))
            }
        };
        match *self {
            Schedule::PowerDecay { mu0, gamma } => {
                check_mu0(mu0)?;
                if !(gamma > 0.0) || !gamma.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "power decay gamma must be positive, got {gamma}"
                    )));
                }
                Ok(())
            }
            Schedule::ExpDecay { mu0, lambda } => {
                check_mu0(mu0)?;
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exponential decay lambda must lie in (0, 1), got {lambda}"
                    )));
                }
                Ok(())
            }
            Schedule::Constant { mu0 } => check_mu0(mu0),
            Schedule::ContinuousDriven { ref design, t0 } => {
                if !t0.is_finite() {
                    return Err(Error::InvalidParameter(format!("t0 must be finite, got {t0}")));
                }
                design.validate()
            }
        }
    }

    /// Start time of the run: the design's own `t0` for continuous-driven
    /// schedules, `default_t0` otherwise.
    pub fn start_time(&self, default_t0: f64) -> f64 {
        match *self {
            Schedule::ContinuousDriven { t0, .. } => t0,
            _ => default_t0,
        }
    }

    /// `μ₀` of the schedule.
    pub fn initial_mu(&self) -> f64 {
        match *self {
            Schedule::PowerDecay { mu0, .. }
            | Schedule::ExpDecay { mu0, .. }
            | Schedule::Constant { mu0 } => mu0,
            Schedule::ContinuousDriven { ref design, t0 } => design.value_at(t0),
        }
    }

    /// Human-readable descriptor used in output metadata.
    pub fn descriptor(&self) -> String {
        match self {
            Schedule::PowerDecay { mu0, gamma } => format!("power(mu0={mu0}, gamma={gamma})"),
            Schedule::ExpDecay { mu0, lambda } => format!("exponential(mu0={mu0}, lambda={lambda})"),
            Schedule::Constant { mu0 } => format!("constant(mu0={mu0})"),
            Schedule::ContinuousDriven { design, t0 } => {
                format!("continuous(design={design:?}, t0={t0})")
            }
        }
    }
}

/// `s = 1/(L + α/μ)`.
pub fn step_size(lipschitz: f64, alpha: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "smoothing parameter must be positive, got {mu}"
        )));
    }
    Ok(1.0 / (lipschitz + alpha / mu))
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn new(v: f64) -> Self {
        Self { sum: v, comp: 0.0 }
    }

    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.comp *= f;
    }
}

/// Schedule position at step `k` together with the running sums.
///
/// `η_k` and the two `η`-weighted sums are stored as mantissas relative to a
/// common factor `e^{log_scale}` so that long strongly convex runs do not
/// overflow. Accessors return natural values, which may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    pub k: usize,
    pub t: f64,
    pub mu: f64,
    pub s: f64,
    time: Compensated,
    sum_s: Compensated,
    eta_scaled: f64,
    sum_eta_s_scaled: Compensated,
    sum_eta_mu_s_scaled: Compensated,
    log_scale: f64,
    step_scale: f64,
}

impl ScheduleState {
    /// State at `k = 0`: empty sums and `η₀ = 1`.
    pub fn initial(sched: &Schedule, t0: f64, lipschitz: f64, alpha: f64) -> Result<Self> {
        Self::initial_scaled(sched, t0, lipschitz, alpha, 1.0)
    }

    /// As [`ScheduleState::initial`] with stepsizes `c/(L + α/μ)`, `c ∈ (0, 1]`.
    pub fn initial_scaled(
        sched: &Schedule,
        t0: f64,
        lipschitz: f64,
        alpha: f64,
        step_scale: f64,
    ) -> Result<Self> {
        sched.validate()?;
        if !(step_scale > 0.0 && step_scale <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step scale must lie in (0, 1], got {step_scale}"
            )));
        }
        let t = sched.start_time(t0);
        let mu = sched.initial_mu();
        if !(mu > MU_FLOOR) || !mu.is_finite() {
            return Err(Error::ScheduleExhausted { t, mu });
        }
        let s = step_scale * step_size(lipschitz, alpha, mu)?;
        Ok(Self {
            k: 0,
            t,
            mu,
            s,
            time: Compensated::new(t),
            sum_s: Compensated::default(),
            eta_scaled: 1.0,
            sum_eta_s_scaled: Compensated::default(),
            sum_eta_mu_s_scaled: Compensated::default(),
            log_scale: 0.0,
            step_scale,
        })
    }

    /// `Σ_{κ<k} s_κ`.
    pub fn sum_s(&self) -> f64 {
        self.sum_s.value()
    }

    /// `η_k = Π_{l<k} (1 − σ s_l)^{−1}`.
    pub fn eta(&self) -> f64 {
        self.eta_scaled * self.log_scale.exp()
    }

    pub fn log_eta(&self) -> f64 {
        self.eta_scaled.ln() + self.log_scale
    }

    /// `Σ_{κ<k} η_{κ+1} s_κ`.
    pub fn sum_eta_s(&self) -> f64 {
        self.sum_eta_s_scaled.value() * self.log_scale.exp()
    }

    /// `Σ_{κ<k} η_{κ+1} μ_κ s_κ`.
    pub fn sum_eta_mu_s(&self) -> f64 {
        self.sum_eta_mu_s_scaled.value() * self.log_scale.exp()
    }

    pub fn ln_sum_eta_s(&self) -> f64 {
        self.sum_eta_s_scaled.value().ln() + self.log_scale
    }

    /// Returns the scaled triple `(η, Σηs, Σημs)` and the common log factor.
    pub fn scaled_sums(&self) -> (f64, f64, f64, f64) {
        (
            self.eta_scaled,
            self.sum_eta_s_scaled.value(),
            self.sum_eta_mu_s_scaled.value(),
            self.log_scale,
        )
    }

    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    /// State for `k + 1`.
    pub fn advance(&self, sched: &Schedule, sigma: f64, lipschitz: f64, alpha: f64) -> Result<Self> {
        let s = self.s;
        let denom = 1.0 - sigma * s;
        if !(denom > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "1 - sigma*s = {denom} is not positive; sigma exceeds the step's curvature"
            )));
        }
        let mut next = self.clone();
        next.k = self.k + 1;
        next.time.add(s);
        next.t = next.time.value();
        next.sum_s.add(s);

        next.eta_scaled = self.eta_scaled / denom;
        next.sum_eta_s_scaled.add(next.eta_scaled * s);
        next.sum_eta_mu_s_scaled.add(next.eta_scaled * self.mu * s);
        if next.eta_scaled.ln() > ETA_RESCALE_LOG {
            let f = next.eta_scaled;
            next.eta_scaled = 1.0;
            next.sum_eta_s_scaled.scale(1.0 / f);
            next.sum_eta_mu_s_scaled.scale(1.0 / f);
            next.log_scale += f.ln();
        }

        let mu = match *sched {
            Schedule::PowerDecay { mu0, gamma } => mu0 * ((next.k + 1) as f64).powf(-gamma),
            Schedule::ExpDecay { mu0, lambda } => mu0 * lambda.powf(next.k as f64),
            Schedule::Constant { mu0 } => mu0,
            Schedule::ContinuousDriven { ref design, .. } => design.next(self.mu, next.t, s),
        };
        if !(mu > MU_FLOOR) || !mu.is_finite() {
            return Err(Error::ScheduleExhausted { t: next.t, mu });
        }
        next.mu = mu;
        next.s = self.step_scale * step_size(lipschitz, alpha, mu)?;
        Ok(next)
    }
}

/// Free-function form of [`ScheduleState::advance`].
pub fn advance(
    sched: &Schedule,
    state: &ScheduleState,
    sigma: f64,
    lipschitz: f64,
    alpha: f64,
) -> Result<ScheduleState> {
    state.advance(sched, sigma, lipschitz, alpha)
}

/// `e^{σ Σ s}`, a lower bound on `η_k`.
pub fn eta_lower_bound(state: &ScheduleState, sigma: f64) -> f64 {
    (sigma * state.sum_s()).exp()
}

/// Relative growth over the second half of the horizon below which a partial
/// sum is considered saturated.
pub const SATURATION_GROWTH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// `Σ_{κ<k} s_κ` for `k = 1..=steps`.
    pub sum_s: Vec<f64>,
    /// `Σ_{κ<k} η_{κ+1} s_κ` for `k = 1..=steps`, possibly infinite.
    pub sum_eta_s: Vec<f64>,
    /// Relative growth of each sum over the last half of the series.
    pub growth_s: f64,
    pub growth_eta_s: f64,
    pub s_saturates: bool,
    pub eta_s_saturates: bool,
    /// True when both sums saturate or both keep growing.
    pub equivalent: bool,
    /// Set when the schedule ran out before the horizon.
    pub exhausted_at: Option<usize>,
}

/// Computes `Σs` and `Σηs` over `horizon` steps and checks that they either
/// both saturate or both keep growing.
pub fn sum_divergence_equivalent(
    sched: &Schedule,
    sigma: f64,
    lipschitz: f64,
    alpha: f64,
    horizon: usize,
) -> Result<DivergenceReport> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut state = ScheduleState::initial(sched, 1.0, lipschitz, alpha)?;
    let mut sum_s = Vec::with_capacity(horizon);
    let mut sum_eta_s = Vec::with_capacity(horizon);
    let mut ln_eta_s = Vec::with_capacity(horizon);
    let mut exhausted_at = None;
    for _ in 0..horizon {
        match state.advance(sched, sigma, lipschitz, alpha) {
            Ok(next) => state = next,
            Err(Error::ScheduleExhausted { .. }) => {
                exhausted_at = Some(state.k);
                break;
            }
            Err(e) => return Err(e),
        }
        sum_s.push(state.sum_s());
        sum_eta_s.push(state.sum_eta_s());
        ln_eta_s.push(state.ln_sum_eta_s());
    }
    let growth = |ln_series: &[f64]| -> f64 {
        match (ln_series.first(), ln_series.last()) {
            (Some(_), Some(&last)) => {
                let mid = ln_series[(ln_series.len() - 1) / 2];
                -(mid - last).exp_m1()
            }
            _ => 0.0,
        }
    };
    let ln_s: Vec<f64> = sum_s.iter().map(|v: &f64| v.ln()).collect();
    let growth_s = if exhausted_at.is_some() { 0.0 } else { growth(&ln_s) };
    let growth_eta_s = if exhausted_at.is_some() { 0.0 } else { growth(&ln_eta_s) };
    let s_saturates = growth_s < SATURATION_GROWTH;
    let eta_s_saturates = growth_eta_s < SATURATION_GROWTH;
    Ok(DivergenceReport {
        sum_s,
        sum_eta_s,
        growth_s,
        growth_eta_s,
        s_saturates,
        eta_s_saturates,
        equivalent: s_saturates == eta_s_saturates,
        exhausted_at,
    })
}
