//! Covariate-shift correction toolkit.
//!
//! When training inputs and deployment inputs come from different
//! distributions while the outcome mechanism `P(y | x)` stays fixed, plain
//! sample averages and unweighted fits are biased for deployment-time
//! quantities. This crate implements the standard repair kit around kernel
//! mean matching, plus a robust combination estimator that couples the
//! matched weights with a fitted regression function:
//!
//! * [`kernels`] — kernel specifications (exponential/Gaussian-family and
//!   polynomial), Gram and cross-Gram assembly, and the dataset container
//!   with its CSV layout.
//! * [`qp`] — a projected-gradient solver for box-and-band constrained
//!   convex quadratic programs, with a brute-force grid oracle for tests.
//! * [`kmm`] — kernel mean matching: importance weights for training rows
//!   obtained by matching kernel feature means against a test sample.
//! * [`ridge`] — kernel ridge regression with pluggable regularization
//!   schedules, and a lasso-penalized linear fallback.
//! * [`estimators`] — estimators of the deployment-time mean outcome: the
//!   weighted average, the regression plug-in, and the variance-reduced
//!   combination of the two.
//! * [`erm`] — weighted and robust empirical risk minimization for squared
//!   and logistic losses over a kernel expansion.
//! * [`datagen`] — seeded synthetic data generators, biased subsampling,
//!   and a tabular binary-classification loader.
//! * [`experiments`] — reproducible benchmark scenarios with JSON/CSV
//!   reports and built-in sanity checks.
//!
//! Every randomized routine takes an explicit 64-bit seed and is
//! deterministic given that seed, including under the parallel replication
//! runner.

pub mod datagen;
pub mod erm;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kernels;
pub mod kmm;
pub mod qp;
pub mod ridge;

mod linalg;

pub use error::{Error, Result};
pub use kernels::{Dataset, KernelSpec, Role};
