//! Two-sample testing for functional data with the quadratic-form statistic
//! `Q_n`, and the sea-wave data pipeline that feeds it.
//!
//! Curves live on a shared [`Grid`](functional::Grid). A set of k projection
//! functions (indicators, B-splines, data-driven trigonometric combinations
//! or principal components) turns each curve into k scores; `Q_n` is the
//! Mahalanobis-type distance between the two groups' mean scores under a
//! pooled covariance, calibrated either by its χ²ₖ limit or by resampling.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bspline;
pub mod chisq;
pub mod error;
pub mod functional;
pub mod io;
pub mod projections;
pub mod qn;
pub mod resampling;
pub mod rng;
pub mod spectra;
pub mod waves;

pub use error::{Error, Result};
pub use functional::{Curve, FunctionalSample, Grid, Interval, JointSample};
pub use projections::{BasisSpec, GVector};
pub use qn::{qn_statistic, score_matrix, TestResult};
pub use resampling::{two_sample_test, Calibration};
