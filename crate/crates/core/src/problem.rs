//! Composite objectives `F = f + h` with a smooth part `f` and a smoothed
//! nonsmooth part `h̃(·, μ)`.

use std::fmt;
use std::sync::Arc;

use crate::approx::{SmoothApprox, SmoothingParams};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Eigenvalues below this fraction of the largest one count as zero.
pub const SIGMA_FLOOR_RATIO: f64 = 1e-10;

/// Smooth convex part `f` with strong-convexity modulus `σ` and gradient
/// Lipschitz constant `L`.
pub trait SmoothPart: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    fn sigma(&self) -> f64;
    fn lipschitz(&self) -> f64;
}

/// `f(x) = ‖A x − b‖₂²` (no ½ factor, so `L = 2λ_max(AᵀA)` and
/// `σ = 2λ_min(AᵀA)`).
#[derive(Debug, Clone)]
pub struct QuadraticLeastSquares {
    a: Matrix,
    b: Vec<f64>,
    sigma: f64,
    lipschitz: f64,
}

pub fn quadratic_least_squares(a: Matrix, b: Vec<f64>) -> Result<QuadraticLeastSquares> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "b has length {}, A has {} rows",
            b.len(),
            a.rows()
        )));
    }
    let eig = linalg::symmetric_eigenvalues(&a.gram())?;
    let lmax = eig.last().copied().unwrap_or(0.0).max(0.0);
    let lmin = eig.first().copied().unwrap_or(0.0);
    let lmin = if lmin < SIGMA_FLOOR_RATIO * lmax { 0.0 } else { lmin };
    Ok(QuadraticLeastSquares {
        a,
        b,
        sigma: 2.0 * lmin,
        lipschitz: 2.0 * lmax,
    })
}

impl QuadraticLeastSquares {
    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }
}

impl SmoothPart for QuadraticLeastSquares {
    fn input_dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        linalg::dot(&r, &r)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r = self.residual(x);
        let mut g = vec![0.0; self.a.cols()];
        self.a.add_matvec_t(&r, 2.0, &mut g);
        g
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Counts `∇ₓF̃` evaluations for one run. Owned by the run, never shared.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GradEvalCounter {
    count: u64,
}

impl GradEvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Evaluates `∇ₓF̃(x, μ)` and records the evaluation.
    pub fn smoothed_grad(&mut self, p: &CompositeProblem, x: &[f64], mu: f64) -> Result<Vec<f64>> {
        let g = p.smoothed_grad(x, mu)?;
        self.count += 1;
        Ok(g)
    }
}

/// `F(x) = f(x) + h(x)` together with the smoothing `h̃` of `h` and, when
/// known, an optimal point.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    f: Arc<dyn SmoothPart>,
    h: Arc<dyn SmoothApprox>,
    optimum: Option<Vec<f64>>,
    optimal_value: Option<f64>,
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "smoothing parameter must be positive and finite, got {mu}"
        )));
    }
    Ok(())
}

impl CompositeProblem {
    pub fn new(f: Arc<dyn SmoothPart>, h: Arc<dyn SmoothApprox>) -> Result<Self> {
        if f.input_dim() != h.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "smooth part takes {} inputs, approximation takes {}",
                f.input_dim(),
                h.input_dim()
            )));
        }
        if f.sigma() > f.lipschitz() {
            return Err(Error::InvalidParameter(format!(
                "sigma ({}) exceeds L ({})",
                f.sigma(),
                f.lipschitz()
            )));
        }
        Ok(Self {
            f,
            h,
            optimum: None,
            optimal_value: None,
        })
    }

    /// Attaches a known minimizer; the optimal value is computed from it.
    pub fn with_optimum(mut self, x_star: Vec<f64>) -> Result<Self> {
        self.check_dim(&x_star)?;
        self.optimal_value = Some(self.true_value(&x_star));
        self.optimum = Some(x_star);
        Ok(self)
    }

    /// Attaches a minimizer and its claimed value, which must agree with
    /// `F(x*)` to `1e-9`.
    pub fn with_optimum_and_value(mut self, x_star: Vec<f64>, value: f64) -> Result<Self> {
        self.check_dim(&x_star)?;
        let actual = self.true_value(&x_star);
        if (actual - value).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "optimal value {value} disagrees with F(x*) = {actual}"
            )));
        }
        self.optimal_value = Some(value);
        self.optimum = Some(x_star);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.f.input_dim()
    }

    pub fn smooth_part(&self) -> &dyn SmoothPart {
        self.f.as_ref()
    }

    pub fn approximation(&self) -> &dyn SmoothApprox {
        self.h.as_ref()
    }

    pub fn optimum(&self) -> Option<&[f64]> {
        self.optimum.as_deref()
    }

    pub fn optimal_value(&self) -> Option<f64> {
        self.optimal_value
    }

    pub fn sigma(&self) -> f64 {
        self.f.sigma()
    }

    pub fn lipschitz(&self) -> f64 {
        self.f.lipschitz()
    }

    pub fn params(&self) -> SmoothingParams {
        self.h.params()
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} entries, problem dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `F(x) = f(x) + h(x)` with the exact nonsmooth `h`.
    pub fn true_value(&self, x: &[f64]) -> f64 {
        self.f.value(x) + self.h.underlying_value(x)
    }

    /// `F̃(x, μ) = f(x) + h̃(x, μ)`.
    pub fn smoothed_value(&self, x: &[f64], mu: f64) -> Result<f64> {
        check_mu(mu)?;
        Ok(self.f.value(x) + self.h.value(x, mu))
    }

    /// `∇ₓF̃(x, μ)`. Runs count evaluations through [`GradEvalCounter`].
    pub fn smoothed_grad(&self, x: &[f64], mu: f64) -> Result<Vec<f64>> {
        check_mu(mu)?;
        let mut g = self.f.grad(x);
        let mut gh = vec![0.0; g.len()];
        self.h.grad_x_into(x, mu, &mut gh);
        for (gi, hi) in g.iter_mut().zip(gh) {
            *gi += hi;
        }
        Ok(g)
    }

    /// `L(μ) = L + α/μ`.
    pub fn lipschitz_at(&self, mu: f64) -> Result<f64> {
        check_mu(mu)?;
        Ok(self.lipschitz() + self.params().alpha / mu)
    }

    /// Short descriptive fingerprint used in output metadata.
    pub fn fingerprint(&self) -> String {
        let p = self.params();
        format!(
            "n={} L={:.6e} sigma={:.6e} alpha={:.6e} beta={:.6e}",
            self.dim(),
            self.lipschitz(),
            self.sigma(),
            p.alpha,
            p.beta
        )
    }
}
