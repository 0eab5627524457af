//! Smooth approximations `h̃(x, μ)` of nonsmooth convex functions `h`.
//!
//! Every approximation carries parameters `(α, β)` such that
//!
//! * `h̃(·, μ)` is convex and `(α/μ)`-smooth,
//! * `h̃(x, μ) ≤ h(x) ≤ h̃(x, μ) + βμ`,
//! * `-β ≤ ∂h̃/∂μ (x, μ) ≤ 0`.
//!
//! The last property makes the approximation Lipschitz continuous in `μ`,
//! which is what lets the smoothing parameter move during a run.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::NormalRng;

/// Smoothness scale `alpha` and approximation-gap scale `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SmoothingParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing parameters must be finite and positive, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

/// A Lipschitz continuous smooth approximation of a convex function.
///
/// Implementations are immutable after construction.
pub trait SmoothApprox: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;

    fn params(&self) -> SmoothingParams;

    /// The exact nonsmooth function `h(x)`.
    fn underlying_value(&self, x: &[f64]) -> f64;

    fn value(&self, x: &[f64], mu: f64) -> f64;

    /// Writes `∇ₓh̃(x, μ)` into `out`, overwriting it.
    fn grad_x_into(&self, x: &[f64], mu: f64, out: &mut [f64]);

    fn grad_mu(&self, x: &[f64], mu: f64) -> f64;

    /// Distance from `(x, μ)` to the nearest place where the closed-form
    /// expression switches branch. Infinite for formulas without branches.
    fn branch_distance(&self, _x: &[f64], _mu: f64) -> f64 {
        f64::INFINITY
    }

    fn grad_x(&self, x: &[f64], mu: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.input_dim()];
        self.grad_x_into(x, mu, &mut g);
        g
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidDimension("input dimension must be at least 1".into()));
    }
    Ok(())
}

/// `√(‖x‖² + μ²) − μ`, a smooth approximation of `‖x‖₂` with parameters `(1, 1)`.
#[derive(Debug, Clone)]
pub struct SqrtL2 {
    dim: usize,
}

pub fn sqrt_l2_approx(dim: usize) -> Result<SqrtL2> {
    check_dim(dim)?;
    Ok(SqrtL2 { dim })
}

impl SmoothApprox for SqrtL2 {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> SmoothingParams {
        SmoothingParams {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    fn underlying_value(&self, x: &[f64]) -> f64 {
        linalg::norm2(x)
    }

    fn value(&self, x: &[f64], mu: f64) -> f64 {
        // ‖x‖²/(r + μ) is the cancellation-free form of r − μ.
        let n2 = linalg::dot(x, x);
        let r = (n2 + mu * mu).sqrt();
        n2 / (r + mu)
    }

    fn grad_x_into(&self, x: &[f64], mu: f64, out: &mut [f64]) {
        let r = (linalg::dot(x, x) + mu * mu).sqrt();
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi / r;
        }
    }

    fn grad_mu(&self, x: &[f64], mu: f64) -> f64 {
        let n2 = linalg::dot(x, x);
        let r = (n2 + mu * mu).sqrt();
        -n2 / (r * (r + mu))
    }
}

/// Huber smoothing of `‖x‖₂` with parameters `(1, 1/2)`.
///
/// At `‖x‖₂ = μ` the quadratic branch is used.
#[derive(Debug, Clone)]
pub struct HuberL2 {
    dim: usize,
}

pub fn huber_l2_approx(dim: usize) -> Result<HuberL2> {
    check_dim(dim)?;
    Ok(HuberL2 { dim })
}

impl SmoothApprox for HuberL2 {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> SmoothingParams {
        SmoothingParams {
            alpha: 1.0,
            beta: 0.5,
        }
    }

    fn underlying_value(&self, x: &[f64]) -> f64 {
        linalg::norm2(x)
    }

    fn value(&self, x: &[f64], mu: f64) -> f64 {
        let n2 = linalg::dot(x, x);
        let n = n2.sqrt();
        if n <= mu {
            n2 / (2.0 * mu)
        } else {
            n - mu / 2.0
        }
    }

    fn grad_x_into(&self, x: &[f64], mu: f64, out: &mut [f64]) {
        let n = linalg::norm2(x);
        let d = if n <= mu { mu } else { n };
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi / d;
        }
    }

    fn grad_mu(&self, x: &[f64], mu: f64) -> f64 {
        let n2 = linalg::dot(x, x);
        if n2.sqrt() <= mu {
            -n2 / (2.0 * mu * mu)
        } else {
            -0.5
        }
    }

    fn branch_distance(&self, x: &[f64], mu: f64) -> f64 {
        (linalg::norm2(x) - mu).abs()
    }
}

/// `μ log Σ exp(xᵢ/μ) − μ log n`, a smooth approximation of `max(x)` with
/// parameters `(1, log n)`.
///
/// All exponentials are taken after subtracting `max(x)`.
#[derive(Debug, Clone)]
pub struct LogSumExpMax {
    dim: usize,
    log_n: f64,
}

/// Requires `dim ≥ 2`: for a single entry the gap scale `log n` is zero.
pub fn log_sum_exp_max_approx(dim: usize) -> Result<LogSumExpMax> {
    check_dim(dim)?;
    if dim < 2 {
        return Err(Error::InvalidDimension(
            "log-sum-exp needs at least 2 entries (beta = log n must be positive)".into(),
        ));
    }
    Ok(LogSumExpMax {
        dim,
        log_n: (dim as f64).ln(),
    })
}

impl LogSumExpMax {
    /// Returns `(max, Σ wᵢ, wᵢ)` with `wᵢ = exp((xᵢ − max)/μ)`.
    fn shifted_weights(x: &[f64], mu: f64) -> (f64, f64, Vec<f64>) {
        let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = x.iter().map(|xi| ((xi - m) / mu).exp()).collect();
        let total = w.iter().sum();
        (m, total, w)
    }
}

impl SmoothApprox for LogSumExpMax {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> SmoothingParams {
        SmoothingParams {
            alpha: 1.0,
            beta: self.log_n,
        }
    }

    fn underlying_value(&self, x: &[f64]) -> f64 {
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn value(&self, x: &[f64], mu: f64) -> f64 {
        let (m, total, _) = Self::shifted_weights(x, mu);
        m + mu * (total.ln() - self.log_n)
    }

    fn grad_x_into(&self, x: &[f64], mu: f64, out: &mut [f64]) {
        let (_, total, w) = Self::shifted_weights(x, mu);
        for (o, wi) in out.iter_mut().zip(w) {
            *o = wi / total;
        }
    }

    fn grad_mu(&self, x: &[f64], mu: f64) -> f64 {
        let (m, total, w) = Self::shifted_weights(x, mu);
        let mean_shift: f64 = w
            .iter()
            .zip(x)
            .map(|(wi, xi)| wi * (xi - m) / mu)
            .sum::<f64>()
            / total;
        total.ln() - mean_shift - self.log_n
    }
}

/// One weighted affine term `w · h̃(A x + b, μ)` of an [`AffineSum`].
#[derive(Debug, Clone)]
pub struct AffineTerm {
    pub weight: f64,
    pub matrix: Matrix,
    pub offset: Vec<f64>,
    pub inner: Arc<dyn SmoothApprox>,
}

impl AffineTerm {
    pub fn new(
        weight: f64,
        matrix: Matrix,
        offset: Vec<f64>,
        inner: Arc<dyn SmoothApprox>,
    ) -> Self {
        Self {
            weight,
            matrix,
            offset,
            inner,
        }
    }

    fn argument(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.matrix.matvec(x);
        for (zi, bi) in z.iter_mut().zip(&self.offset) {
            *zi += bi;
        }
        z
    }
}

/// Weighted sum of smooth approximations composed with affine maps, with
/// parameters `(Σ wᵢαᵢ‖Aᵢ‖₂², Σ wᵢβᵢ)`.
#[derive(Debug, Clone)]
pub struct AffineSum {
    terms: Vec<AffineTerm>,
    spectral_norms: Vec<f64>,
    dim: usize,
    params: SmoothingParams,
}

pub fn affine_sum(terms: Vec<AffineTerm>) -> Result<AffineSum> {
    let first = terms
        .first()
        .ok_or_else(|| Error::InvalidDimension("affine sum needs at least one term".into()))?;
    let dim = first.matrix.cols();
    for (index, t) in terms.iter().enumerate() {
        let fail = |reason: String| Err(Error::AffineTerm { index, reason });
        if !(t.weight.is_finite() && t.weight > 0.0) {
            return fail(format!("weight must be positive, got {}", t.weight));
        }
        if t.matrix.cols() != dim {
            return fail(format!(
                "matrix has {} columns, expected {dim}",
                t.matrix.cols()
            ));
        }
        if t.matrix.rows() != t.inner.input_dim() {
            return fail(format!(
                "matrix has {} rows but inner approximation takes {} inputs",
                t.matrix.rows(),
                t.inner.input_dim()
            ));
        }
        if t.offset.len() != t.matrix.rows() {
            return fail(format!(
                "offset has length {}, expected {}",
                t.offset.len(),
                t.matrix.rows()
            ));
        }
    }
    let spectral_norms: Vec<f64> = terms.iter().map(|t| linalg::spectral_norm(&t.matrix)).collect();
    let alpha = terms
        .iter()
        .zip(&spectral_norms)
        .map(|(t, n)| t.weight * t.inner.params().alpha * n * n)
        .sum();
    let beta = terms.iter().map(|t| t.weight * t.inner.params().beta).sum();
    let params = SmoothingParams::new(alpha, beta)?;
    Ok(AffineSum {
        terms,
        spectral_norms,
        dim,
        params,
    })
}

impl AffineSum {
    pub fn terms(&self) -> &[AffineTerm] {
        &self.terms
    }

    pub fn spectral_norms(&self) -> &[f64] {
        &self.spectral_norms
    }
}

impl SmoothApprox for AffineSum {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> SmoothingParams {
        self.params
    }

    fn underlying_value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.inner.underlying_value(&t.argument(x)))
            .sum()
    }

    fn value(&self, x: &[f64], mu: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.inner.value(&t.argument(x), mu))
            .sum()
    }

    fn grad_x_into(&self, x: &[f64], mu: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            let g = t.inner.grad_x(&t.argument(x), mu);
            t.matrix.add_matvec_t(&g, t.weight, out);
        }
    }

    fn grad_mu(&self, x: &[f64], mu: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.inner.grad_mu(&t.argument(x), mu))
            .sum()
    }

    fn branch_distance(&self, x: &[f64], mu: f64) -> f64 {
        self.terms
            .iter()
            .zip(&self.spectral_norms)
            .map(|(t, &n)| {
                let d = t.inner.branch_distance(&t.argument(x), mu);
                if n > 0.0 {
                    d / n
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Smooth approximation of `‖C x − d‖₁` as a sum of one-dimensional
/// approximations of `|cᵢᵀx − dᵢ|`, built with `inner_of_dim1`.
pub fn l1_of_affine<F>(c: &Matrix, d: &[f64], mut inner_of_dim1: F) -> Result<AffineSum>
where
    F: FnMut() -> Result<Arc<dyn SmoothApprox>>,
{
    if d.len() != c.rows() {
        return Err(Error::DimensionMismatch(format!(
            "offset has length {}, matrix has {} rows",
            d.len(),
            c.rows()
        )));
    }
    let terms = (0..c.rows())
        .map(|i| {
            Ok(AffineTerm::new(
                1.0,
                Matrix::new(1, c.cols(), c.row(i).to_vec())?,
                vec![-d[i]],
                inner_of_dim1()?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    affine_sum(terms)
}

pub const CERT_GRAD_REL_TOL: f64 = 1e-6;
pub const CERT_INEQ_SLACK: f64 = 1e-9;
/// Finite-difference checks skip points closer than this to a branch switch.
pub const CERT_BRANCH_EXCLUSION: f64 = 1e-3;

/// Worst-case violations found by [`certify`]. Zero means no violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub samples: usize,
    /// Samples skipped by the finite-difference checks near branch switches.
    pub excluded: usize,
    /// `max(h̃ − h, h − h̃ − βμ)` over samples, clipped below at 0.
    pub sandwich_violation: f64,
    /// Distance of `∂h̃/∂μ` outside `[−β, 0]`.
    pub grad_mu_range_violation: f64,
    pub grad_x_rel_error: f64,
    pub grad_mu_rel_error: f64,
    /// Largest `‖∇h̃(x) − ∇h̃(y)‖ / ((α/μ)‖x − y‖)`.
    pub smoothness_ratio: f64,
    pub convexity_violation: f64,
    pub pass: bool,
}

/// Numerically checks the approximation contract on `sample_count` random
/// points drawn from a seeded generator.
pub fn certify(approx: &dyn SmoothApprox, sample_count: usize, rng_seed: u64) -> CertificationReport {
    let mut rng = NormalRng::seed_from_u64(rng_seed);
    let n = approx.input_dim();
    let SmoothingParams { alpha, beta } = approx.params();

    let mut rep = CertificationReport {
        samples: sample_count,
        excluded: 0,
        sandwich_violation: 0.0,
        grad_mu_range_violation: 0.0,
        grad_x_rel_error: 0.0,
        grad_mu_rel_error: 0.0,
        smoothness_ratio: 0.0,
        convexity_violation: 0.0,
        pass: false,
    };

    let mut g_fd = vec![0.0; n];
    for _ in 0..sample_count {
        let scale = 10f64.powf(rng.uniform_in(-1.0, 1.0));
        let mu = 10f64.powf(rng.uniform_in(-2.0, 1.0));
        let x: Vec<f64> = (0..n).map(|_| scale * rng.standard_normal()).collect();
        // Half of the partner points are local perturbations, half independent.
        let y: Vec<f64> = if rng.uniform() < 0.5 {
            x.iter().map(|xi| xi + 1e-2 * scale * rng.standard_normal()).collect()
        } else {
            (0..n).map(|_| scale * rng.standard_normal()).collect()
        };

        let h = approx.underlying_value(&x);
        let v = approx.value(&x, mu);
        let sandwich = (v - h).max(h - v - beta * mu).max(0.0);
        rep.sandwich_violation = rep.sandwich_violation.max(sandwich);

        let gmu = approx.grad_mu(&x, mu);
        let range = (gmu - 0.0).max(-beta - gmu).max(0.0);
        rep.grad_mu_range_violation = rep.grad_mu_range_violation.max(range);

        let gx = approx.grad_x(&x, mu);
        let gy = approx.grad_x(&y, mu);
        let dxy = linalg::dist_sq(&x, &y).sqrt();
        if dxy > 0.0 {
            let ratio = linalg::dist_sq(&gx, &gy).sqrt() / ((alpha / mu) * dxy);
            rep.smoothness_ratio = rep.smoothness_ratio.max(ratio);
        }

        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let rhs = 0.5 * (v + approx.value(&y, mu));
        let conv = (approx.value(&mid, mu) - rhs).max(0.0);
        rep.convexity_violation = rep.convexity_violation.max(conv);

        if approx.branch_distance(&x, mu) < CERT_BRANCH_EXCLUSION {
            rep.excluded += 1;
            continue;
        }

        let mut xp = x.clone();
        for i in 0..n {
            let step = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let fp = approx.value(&xp, mu);
            xp[i] = x[i] - step;
            let fm = approx.value(&xp, mu);
            xp[i] = x[i];
            g_fd[i] = (fp - fm) / (2.0 * step);
        }
        // Relative error with a unit floor on the reference magnitude.
        let gx_norm = linalg::norm2(&gx).max(1.0);
        rep.grad_x_rel_error = rep
            .grad_x_rel_error
            .max(linalg::dist_sq(&gx, &g_fd).sqrt() / gx_norm);

        let hmu = 1e-6 * mu;
        let fd_mu = (approx.value(&x, mu + hmu) - approx.value(&x, mu - hmu)) / (2.0 * hmu);
        rep.grad_mu_rel_error = rep
            .grad_mu_rel_error
            .max((fd_mu - gmu).abs() / gmu.abs().max(1.0));
    }

    rep.pass = rep.sandwich_violation <= CERT_INEQ_SLACK
        && rep.grad_mu_range_violation <= CERT_INEQ_SLACK
        && rep.grad_x_rel_error <= CERT_GRAD_REL_TOL
        && rep.grad_mu_rel_error <= CERT_GRAD_REL_TOL
        && rep.smoothness_ratio <= 1.0 + CERT_INEQ_SLACK
        && rep.convexity_violation <= CERT_INEQ_SLACK;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_l2_examples() {
        let a = sqrt_l2_approx(2).unwrap();
        assert_eq!(a.value(&[0.0, 0.0], 1.0), 0.0);
        assert_eq!(a.value(&[3.0, 4.0], 12.0), 1.0);
        assert_eq!(a.grad_mu(&[0.0, 0.0], 1.0), 0.0);
        assert_eq!(a.params(), SmoothingParams { alpha: 1.0, beta: 1.0 });
        let g = a.grad_x(&[3.0, 4.0], 12.0);
        assert_relative_eq!(g[0], 3.0 / 13.0, epsilon = 1e-15);
        assert_relative_eq!(g[1], 4.0 / 13.0, epsilon = 1e-15);
        assert_relative_eq!(a.grad_mu(&[3.0, 4.0], 12.0), 12.0 / 13.0 - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn huber_examples() {
        let a = huber_l2_approx(2).unwrap();
        assert_eq!(a.value(&[1.0, 0.0], 2.0), 0.25);
        assert_eq!(a.value(&[3.0, 4.0], 2.0), 4.0);
        assert_eq!(a.grad_mu(&[3.0, 4.0], 2.0), -0.5);
        assert_eq!(a.params().beta, 0.5);
    }

    #[test]
    fn huber_boundary_uses_quadratic_branch() {
        let a = huber_l2_approx(2).unwrap();
        let x = [3.0, 4.0];
        assert_eq!(a.value(&x, 5.0), 2.5);
        assert_eq!(a.grad_x(&x, 5.0), vec![0.6, 0.8]);
        assert_eq!(a.grad_mu(&x, 5.0), -0.5);
        let x = [1.0, 0.0];
        assert_eq!(a.grad_mu(&x, 1.0), -0.5);
    }

    #[test]
    fn log_sum_exp_examples() {
        let a = log_sum_exp_max_approx(2).unwrap();
        assert_eq!(a.value(&[0.0, 0.0], 1.0), 0.0);
        let b = log_sum_exp_max_approx(4).unwrap();
        for mu in [1e-3, 0.1, 1.0, 37.0] {
            assert_eq!(b.value(&[2.5; 4], mu), 2.5);
        }
    }

    #[test]
    fn log_sum_exp_grad_mu_in_range_and_matches_fd() {
        let a = log_sum_exp_max_approx(2).unwrap();
        let x = [5.0, -5.0];
        let mu = 0.1;
        let g = a.grad_mu(&x, mu);
        assert!((-(2f64.ln())..=0.0).contains(&g), "{g}");
        let h = 1e-6;
        let fd = (a.value(&x, mu + h) - a.value(&x, mu - h)) / (2.0 * h);
        assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "fd={fd} g={g}");
    }

    #[test]
    fn log_sum_exp_survives_tiny_mu() {
        let a = log_sum_exp_max_approx(3).unwrap();
        let v = a.value(&[1000.0, -1000.0, 999.0], 1e-3);
        assert!(v.is_finite());
        assert!(v <= 1000.0 && v >= 1000.0 - 1e-3 * 3f64.ln());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(sqrt_l2_approx(0), Err(Error::InvalidDimension(_))));
        assert!(matches!(huber_l2_approx(0), Err(Error::InvalidDimension(_))));
        assert!(matches!(log_sum_exp_max_approx(0), Err(Error::InvalidDimension(_))));
        assert!(matches!(log_sum_exp_max_approx(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn identity_affine_term_reproduces_inner() {
        let inner = Arc::new(sqrt_l2_approx(3).unwrap());
        let s = affine_sum(vec![AffineTerm::new(
            1.0,
            Matrix::identity(3).unwrap(),
            vec![0.0; 3],
            inner.clone(),
        )])
        .unwrap();
        assert_relative_eq!(s.params().alpha, 1.0, max_relative = 1e-12);
        assert_eq!(s.params().beta, 1.0);
        let x = [0.3, -1.2, 2.0];
        assert_eq!(s.value(&x, 0.7), inner.value(&x, 0.7));
        assert_eq!(s.grad_x(&x, 0.7), inner.grad_x(&x, 0.7));
        assert_eq!(s.grad_mu(&x, 0.7), inner.grad_mu(&x, 0.7));
    }

    #[test]
    fn zero_weights_rejected() {
        let inner: Arc<dyn SmoothApprox> = Arc::new(sqrt_l2_approx(1).unwrap());
        let term = |w| AffineTerm::new(w, Matrix::identity(1).unwrap(), vec![0.0], inner.clone());
        let err = affine_sum(vec![term(0.0), term(0.0)]).unwrap_err();
        assert!(matches!(err, Error::AffineTerm { index: 0, .. }));
    }

    #[test]
    fn dimension_mismatch_names_term() {
        let inner: Arc<dyn SmoothApprox> = Arc::new(sqrt_l2_approx(2).unwrap());
        let good = AffineTerm::new(1.0, Matrix::identity(2).unwrap(), vec![0.0; 2], inner.clone());
        let bad = AffineTerm::new(1.0, Matrix::zeros(3, 2).unwrap(), vec![0.0; 3], inner);
        let err = affine_sum(vec![good, bad]).unwrap_err();
        assert!(matches!(err, Error::AffineTerm { index: 1, .. }), "{err:?}");
        assert!(matches!(affine_sum(vec![]), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn l1_params_are_row_norms_and_count() {
        let c = Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 1.0]]).unwrap();
        let d = [0.1, 0.2, 0.3];
        let h = l1_of_affine(&c, &d, || Ok(Arc::new(sqrt_l2_approx(1)?) as Arc<dyn SmoothApprox>))
            .unwrap();
        assert_relative_eq!(h.params().alpha, 5.0 + 9.25 + 1.0, max_relative = 1e-12);
        assert_eq!(h.params().beta, 3.0);
        let x = [0.4, -0.7];
        let exact: f64 = (0..3).map(|i| (linalg::dot(c.row(i), &x) - d[i]).abs()).sum();
        assert_relative_eq!(h.underlying_value(&x), exact, max_relative = 1e-14);
    }

    #[derive(Debug)]
    struct HalvedBeta<A>(A);

    impl<A: SmoothApprox> SmoothApprox for HalvedBeta<A> {
        fn input_dim(&self) -> usize {
            self.0.input_dim()
        }
        fn params(&self) -> SmoothingParams {
            let p = self.0.params();
            SmoothingParams { alpha: p.alpha, beta: p.beta / 2.0 }
        }
        fn underlying_value(&self, x: &[f64]) -> f64 {
            self.0.underlying_value(x)
        }
        fn value(&self, x: &[f64], mu: f64) -> f64 {
            self.0.value(x, mu)
        }
        fn grad_x_into(&self, x: &[f64], mu: f64, out: &mut [f64]) {
            self.0.grad_x_into(x, mu, out)
        }
        fn grad_mu(&self, x: &[f64], mu: f64) -> f64 {
            self.0.grad_mu(x, mu)
        }
    }

    #[test]
    fn certification_passes_for_shipped_approximations() {
        let sqrt = certify(&sqrt_l2_approx(5).unwrap(), 1000, 1);
        assert!(sqrt.pass, "{sqrt:?}");
        let huber = certify(&huber_l2_approx(3).unwrap(), 1000, 2);
        assert!(huber.pass, "{huber:?}");
        let lse = certify(&log_sum_exp_max_approx(6).unwrap(), 1000, 3);
        assert!(lse.pass, "{lse:?}");
    }

    #[test]
    fn certification_catches_halved_beta() {
        let rep = certify(&HalvedBeta(sqrt_l2_approx(5).unwrap()), 1000, 1);
        assert!(!rep.pass);
        assert!(rep.sandwich_violation > CERT_INEQ_SLACK);
    }
}
