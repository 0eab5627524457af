use std::sync::Arc;

use serde::Serialize;

use crate::approx::{huber_l2_approx, l1_of_affine, sqrt_l2_approx, SmoothApprox};
use crate::error::Result;
use crate::harness::config::{ProblemConfig, Smoothing};
use crate::linalg::Matrix;
use crate::problem::{quadratic_least_squares, CompositeProblem};
use crate::rng::NormalRng;

/// Random data behind a generated problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemData {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Matrix,
    pub d: Vec<f64>,
    pub x_star: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub problem: CompositeProblem,
    pub data: ProblemData,
}

/// Builds `F(x) = ‖Ax − b‖₂² + ‖Cx − d‖₁` with standard-normal `A`, `C`, `x*`
/// (drawn in that order, row-major) and `b = Ax*`, `d = Cx*`, so that
/// `F(x*) = 0` exactly.
pub fn generate_problem(cfg: &ProblemConfig, smoothing: Smoothing) -> Result<GeneratedProblem> {
    cfg.validate()?;
    let mut rng = NormalRng::seed_from_u64(cfg.rng_seed);
    let a = Matrix::new(cfg.n_a, cfg.n_x, rng.normal_vec(cfg.n_a * cfg.n_x))?;
    let c = Matrix::new(cfg.n_c, cfg.n_x, rng.normal_vec(cfg.n_c * cfg.n_x))?;
    let x_star = rng.normal_vec(cfg.n_x);
    let b = a.matvec(&x_star);
    let d = c.matvec(&x_star);

    let f = quadratic_least_squares(a.clone(), b.clone())?;
    let h = l1_of_affine(&c, &d, || -> Result<Arc<dyn SmoothApprox>> {
        Ok(match smoothing {
            Smoothing::Sqrt => Arc::new(sqrt_l2_approx(1)?),
            Smoothing::Huber => Arc::new(huber_l2_approx(1)?),
        })
    })?;
    let problem = CompositeProblem::new(Arc::new(f), Arc::new(h))?
        .with_optimum_and_value(x_star.clone(), 0.0)?;
    Ok(GeneratedProblem {
        problem,
        data: ProblemData { a, b, c, d, x_star },
    })
}
