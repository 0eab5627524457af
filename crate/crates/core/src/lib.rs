//! Smoothing gradient method and smoothed gradient flow for nonsmooth convex
//! composite problems, with the bounds used to check them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod approx;
pub mod error;
pub mod flow;
pub mod harness;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
