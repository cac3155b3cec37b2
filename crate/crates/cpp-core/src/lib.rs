//! Robust point prediction for conjugate Gaussian regression and known-noise
//! Gaussian-process regression.
//!
//! The prediction at a new covariate vector is chosen by projective
//! consistency: among candidate responses `a`, pick the one minimizing the
//! summed divergence between each observation's leave-one-out predictive law
//! and its swapped predictive law, where the swap replaces that observation
//! by the candidate pair. Both laws are Gaussian; the swapped mean is affine
//! in `a`, which keeps each objective term a smooth function of a single
//! mean gap and makes the minimization one-dimensional.
//!
//! Module map:
//! * [`conjugate`] — posterior, leave-one-out, and swapped-predictive algebra
//!   for the Gaussian linear model, with fast rank-one routes and naive
//!   refactorization oracles;
//! * [`gp`] — the same predictive constructions for Gaussian-process
//!   regression with a known noise variance;
//! * [`divergence`] — closed-form Gaussian divergences (log-Bhattacharyya,
//!   squared Hellinger, density-power) with their gap derivatives, convexity
//!   radii, and derivative bounds;
//! * [`solver`] — objective assembly and one-dimensional minimization, plus
//!   the unknown-variance strategies that average over posterior noise draws;
//! * [`lab`] — synthetic-data generation, response contamination, and the
//!   evaluation harness comparing robust and plug-in predictions.

pub mod conjugate;
pub mod divergence;
pub mod error;
pub mod gp;
pub mod lab;
pub mod solver;

pub use error::{CppError, Result};
