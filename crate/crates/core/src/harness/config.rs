use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{MuDesign, Schedule};

/// Sizes and seed of a synthetic least-squares-plus-ℓ1 problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n_x: usize,
    #[serde(rename = "n_A")]
    pub n_a: usize,
    #[serde(rename = "n_C")]
    pub n_c: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_a == 0 || self.n_c == 0 {
            return Err(Error::Config(format!(
                "problem sizes must be at least 1, got n_x={}, n_A={}, n_C={}",
                self.n_x, self.n_a, self.n_c
            )));
        }
        Ok(())
    }
}

/// Smooth approximation used for each `|cᵢᵀx − dᵢ|` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    Sqrt,
    Huber,
}

fn one() -> f64 {
    1.0
}

/// Schedule selected by name, with its parameters alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `μ_k = μ₀ (k+1)^{−γ}`.
    Power {
        #[serde(default = "one")]
        mu0: f64,
        gamma: f64,
    },
    /// `μ_k = μ₀ λ^k`.
    Exponential {
        #[serde(default = "one")]
        mu0: f64,
        lambda: f64,
    },
    Constant {
        #[serde(default = "one")]
        mu0: f64,
    },
    /// `μ(t) = μ₀ − c (t − t₀)`.
    ContinuousLinear {
        #[serde(default = "one")]
        mu0: f64,
        rate: f64,
    },
    /// `μ(t) = μ₀ e^{−γ (t − t₀)}`.
    ContinuousExponential {
        #[serde(default = "one")]
        mu0: f64,
        gamma: f64,
    },
    /// `μ(t) = μ₀ (1 + t − t₀)^{−p}`.
    ContinuousReciprocal {
        #[serde(default = "one")]
        mu0: f64,
        power: f64,
    },
}

impl ScheduleConfig {
    /// Continuous design starting at `t0`, if this is a continuous-time schedule.
    pub fn design(&self, t0: f64) -> Option<MuDesign> {
        match *self {
            ScheduleConfig::ContinuousLinear { mu0, rate } => Some(MuDesign::Linear { mu0, rate, t0 }),
            ScheduleConfig::ContinuousExponential { mu0, gamma } => {
                Some(MuDesign::Exponential { mu0, gamma, t0 })
            }
            ScheduleConfig::ContinuousReciprocal { mu0, power } => {
                Some(MuDesign::Reciprocal { mu0, power, t0 })
            }
            _ => None,
        }
    }

    pub fn to_schedule(&self, t0: f64) -> Schedule {
        match *self {
            ScheduleConfig::Power { mu0, gamma } => Schedule::PowerDecay { mu0, gamma },
            ScheduleConfig::Exponential { mu0, lambda } => Schedule::ExpDecay { mu0, lambda },
            ScheduleConfig::Constant { mu0 } => Schedule::Constant { mu0 },
            _ => Schedule::ContinuousDriven {
                design: self.design(t0).expect("continuous variant"),
                t0,
            },
        }
    }
}

fn default_rtol() -> f64 {
    1e-3
}

fn default_atol() -> f64 {
    1e-6
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "one")]
    pub t0: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub grad_eval_budget: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_steps: None,
            t_end: None,
            rtol: default_rtol(),
            atol: default_atol(),
            t0: 1.0,
            x0: None,
            stride: 1,
            grad_eval_budget: None,
        }
    }
}

/// Default step counts: 1250 for strongly convex problems, 15000 otherwise.
pub const DEFAULT_STEPS_STRONG: usize = 1250;
pub const DEFAULT_STEPS_NONSTRONG: usize = 15_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub smoothing: Smoothing,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub outputs: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.schedule
            .to_schedule(self.run.t0)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(x0) = &self.run.x0 {
            if x0.len() != self.problem.n_x {
                return Err(Error::Config(format!(
                    "x0 has {} entries, n_x is {}",
                    x0.len(),
                    self.problem.n_x
                )));
            }
        }
        if !(self.run.rtol > 0.0) || !(self.run.atol > 0.0) {
            return Err(Error::Config("rtol and atol must be positive".into()));
        }
        if self.run.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if let Some(t_end) = self.run.t_end {
            if !(t_end > self.run.t0) {
                return Err(Error::Config(format!(
                    "t_end ({t_end}) must exceed t0 ({})",
                    self.run.t0
                )));
            }
        }
        Ok(())
    }

    pub fn x0(&self) -> Vec<f64> {
        self.run.x0.clone().unwrap_or_else(|| vec![0.0; self.problem.n_x])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"n_x": 10, "n_A": 20, "n_C": 50, "rng_seed": 3},
                "schedule": {"name": "power", "gamma": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.problem.n_a, 20);
        assert_eq!(cfg.smoothing, Smoothing::Sqrt);
        assert_eq!(cfg.schedule, ScheduleConfig::Power { mu0: 1.0, gamma: 0.5 });
        assert_eq!(cfg.run.t0, 1.0);
        assert_eq!(cfg.x0(), vec![0.0; 10]);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"problem": {"n_x": 0, "n_A": 2, "n_C": 5}, "schedule": {"name": "power", "gamma": 0.5}}"#,
            r#"{"problem": {"n_x": 2, "n_A": 2, "n_C": 5}, "schedule": {"name": "warp", "gamma": 0.5}}"#,
            r#"{"problem": {"n_x": 2, "n_A": 2, "n_C": 5}, "schedule": {"name": "exponential", "lambda": 1.5}}"#,
            r#"{"problem": {"n_x": 2, "n_A": 2, "n_C": 5}, "schedule": {"name": "power", "gamma": 0.5}, "run": {"x0": [1.0]}}"#,
            r#"{"problem": {"n_x": 2, "n_A": 2, "n_C": 5, "extra": 1}, "schedule": {"name": "power", "gamma": 0.5}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn continuous_schedules_carry_designs() {
        let s = ScheduleConfig::ContinuousReciprocal { mu0: 1.0, power: 1.0 };
        assert!(matches!(s.to_schedule(1.0), Schedule::ContinuousDriven { t0, .. } if t0 == 1.0));
        assert!(ScheduleConfig::Power { mu0: 1.0, gamma: 1.0 }.design(1.0).is_none());
    }
}
