//! Safe sample screening for convex empirical risk minimization.
//!
//! The crate builds ellipsoidal regions certified to contain the optimum of an
//! ERM problem, and runs closed-form per-sample tests over them. Samples whose
//! margin provably stays inside the flat interval of a *safe loss* have a zero
//! optimal dual variable and can be removed before fitting without changing the
//! solution.
//!
//! Everything here is pure numerics over `alloc` containers; file formats,
//! synthetic data and the command line live in the `safescreen` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod data;
pub mod ellipsoid;
pub mod erm;
mod error;
pub mod kernels;
pub mod linalg;
pub mod losses;
pub mod screening;

pub use data::{Dataset, Mode, ModelVector, ProblemKind, SampleMask};
pub use ellipsoid::{build_region, CutRegion, Ellipsoid};
pub use erm::{ErmProblem, Penalty, SolveTrace, SolverOptions, TraceEntry};
pub use error::{Error, Result};
pub use kernels::{gaussian_gram, kernelize, linear_gram, GramMatrix, Kernel};
pub use linalg::Matrix;
pub use losses::{FlatInterval, LossFamily, SafeLoss};
pub use screening::{
    compression_order, compression_scores, gap_ball_region, max_linear_over_region, screen,
    verify_safety, SafetyCheck,
    ScreeningReport, ScreeningSettings, DEFAULT_STRICT_EPS,
};
