//! Finite-sample calibration of `Q_n`: random-split permutation nulls, the
//! spectral Monte Carlo null, p-values, and quantile tables.
//!
//! Replicate `r` draws only from the substream keyed by `(seed, r)`, and
//! replicate values are collected in replicate order, so results do not
//! depend on scheduling or on the number of threads.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chisq::chi_square_quantile;
use crate::error::{Error, Result};
use crate::functional::{Curve, FunctionalSample, JointSample};
use crate::projections::{BasisSpec, GVector};
use crate::qn::{qn_from_rows, qn_statistic, score_matrix, TestResult};
use crate::rng::{substream, StreamRng};
use crate::spectra::{average_spectrum, simulate_with_rng, ParzenEstimator, SpectralDensity};

/// Fewest replicates accepted by [`quantile_table`].
pub const MIN_TABLE_REPLICATES: usize = 100;

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    PermutationSplit,
    SpectralMC,
}

/// Number of replicates, seed, and group sizes of a resampling run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResamplingPlan {
    pub method: Method,
    pub b: usize,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    /// Run replicates on the rayon pool; results are identical either way.
    pub parallel: bool,
}

impl ResamplingPlan {
    pub fn new(method: Method, b: usize, seed: u64, m: usize, n: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidParams("number of replicates must be at least 1".into()));
        }
        if m < 2 || n < 2 {
            return Err(Error::TooFewCurves { m, n });
        }
        Ok(Self {
            method,
            b,
            seed,
            m,
            n,
            parallel: true,
        })
    }

    pub fn serial(mut self) -> Self {
        self.parallel = false;
        self
    }

    fn replicate_rng(&self, r: usize) -> StreamRng {
        substream(self.seed, &[r as u64])
    }

    /// Row indices of groups X and Y for replicate `r`.
    fn split(&self, r: usize) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..self.m + self.n).collect();
        idx.shuffle(&mut self.replicate_rng(r));
        let ys = idx.split_off(self.m);
        (idx, ys)
    }
}

/// Replicate values in replicate order, without the failed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    pub values: Vec<f64>,
    pub failed: usize,
    pub b: usize,
}

impl NullDistribution {
    pub fn effective(&self) -> usize {
        self.values.len()
    }
}

fn replicate_failed(e: &Error) -> bool {
    matches!(e, Error::SingularCovariance(_) | Error::DegenerateCovariance { .. })
}

fn run_replicates<F>(plan: &ResamplingPlan, f: F) -> Result<NullDistribution>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let results: Vec<Result<f64>> = if plan.parallel {
        (0..plan.b).into_par_iter().map(&f).collect()
    } else {
        (0..plan.b).map(&f).collect()
    };
    let mut values = Vec::with_capacity(plan.b);
    let mut failed = 0;
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(e) if replicate_failed(&e) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if failed as f64 > MAX_FAILED_FRACTION * plan.b as f64 {
        return Err(Error::TooManyFailedReplicates {
            failed,
            total: plan.b,
        });
    }
    if failed > 0 {
        log::warn!("{failed} of {} replicates had a singular covariance and were excluded", plan.b);
    }
    Ok(NullDistribution {
        values,
        failed,
        b: plan.b,
    })
}

fn check_sizes(joint: &JointSample, plan: &ResamplingPlan) -> Result<()> {
    if joint.m() != plan.m || joint.n() != plan.n {
        return Err(Error::DimensionMismatch(format!(
            "plan sizes ({}, {}) do not match sample sizes ({}, {})",
            plan.m,
            plan.n,
            joint.m(),
            joint.n()
        )));
    }
    Ok(())
}

/// Null distribution of `Q_n` over random splits of the pooled rows of a
/// score matrix into groups of sizes `m` and `n`.
pub fn permutation_null_scores(scores: &DMatrix<f64>, plan: &ResamplingPlan) -> Result<NullDistribution> {
    if scores.nrows() != plan.m + plan.n {
        return Err(Error::DimensionMismatch(format!(
            "{} score rows for sizes ({}, {})",
            scores.nrows(),
            plan.m,
            plan.n
        )));
    }
    run_replicates(plan, |r| {
        let (xs, ys) = plan.split(r);
        qn_from_rows(scores, &xs, &ys)
    })
}

/// Random-split null for fixed g-functions.
pub fn permutation_null_with_g(joint: &JointSample, g: &GVector, plan: &ResamplingPlan) -> Result<NullDistribution> {
    check_sizes(joint, plan)?;
    let scores = score_matrix(joint.pooled(), g)?;
    permutation_null_scores(&scores.scores, plan)
}

/// Random-split null of `Q_n` for the scheme `spec`.
///
/// Schemes whose functions depend only on the unlabeled pooled sample are
/// built once and the pooled scores computed once; schemes that use the
/// labels (group-weighted PCA) are rebuilt for every split.
pub fn permutation_null(joint: &JointSample, spec: &BasisSpec, plan: &ResamplingPlan) -> Result<NullDistribution> {
    check_sizes(joint, plan)?;
    if spec.label_invariant() {
        let g = spec.build(joint)?;
        permutation_null_with_g(joint, &g, plan)
    } else {
        permutation_null_rebuilding(joint, spec, plan)
    }
}

/// Random-split null that rebuilds the g-functions from every relabeled sample.
pub fn permutation_null_rebuilding(
    joint: &JointSample,
    spec: &BasisSpec,
    plan: &ResamplingPlan,
) -> Result<NullDistribution> {
    check_sizes(joint, plan)?;
    run_replicates(plan, |r| {
        let (xs, ys) = plan.split(r);
        let relabeled = joint.relabel(&xs, &ys)?;
        let g = spec.build(&relabeled)?;
        let scores = score_matrix(relabeled.pooled(), &g)?;
        let x_rows: Vec<usize> = relabeled.x_rows().collect();
        let y_rows: Vec<usize> = relabeled.y_rows().collect();
        qn_from_rows(&scores.scores, &x_rows, &y_rows)
    })
}

/// Add-one p-value `(1 + #{v ≥ observed}) / (B + 1)`.
pub fn permutation_pvalue(observed_qn: f64, null_values: &[f64]) -> f64 {
    let exceed = null_values.iter().filter(|&&v| v >= observed_qn).count();
    (1 + exceed) as f64 / (null_values.len() + 1) as f64
}

/// Record length, sampling rate and estimator settings for the spectral null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSimConfig {
    pub duration: f64,
    pub fs: f64,
    pub parzen_l: usize,
}

impl Default for SpectralSimConfig {
    fn default() -> Self {
        Self {
            duration: 1800.0,
            fs: 1.28,
            parzen_l: 60,
        }
    }
}

/// Monte Carlo null for comparing two sets of estimated spectra.
///
/// All `m + n` spectra are averaged into `s_avg`. Replicate `r` simulates
/// `m + n` records from `s_avg` (record `i` from substream `(seed, r, i)`),
/// re-estimates their spectra on the same grid, takes the first `m` as
/// group X and the rest as group Y, and evaluates `Q_n` for `spec`.
pub fn spectral_mc_null(
    spectra_x: &[SpectralDensity],
    spectra_y: &[SpectralDensity],
    sim: &SpectralSimConfig,
    spec: &BasisSpec,
    plan: &ResamplingPlan,
) -> Result<NullDistribution> {
    if spectra_x.len() != plan.m || spectra_y.len() != plan.n {
        return Err(Error::DimensionMismatch(format!(
            "plan sizes ({}, {}) do not match {} and {} spectra",
            plan.m,
            plan.n,
            spectra_x.len(),
            spectra_y.len()
        )));
    }
    let all: Vec<SpectralDensity> = spectra_x.iter().chain(spectra_y).cloned().collect();
    let s_avg = average_spectrum(&all)?;
    let estimator = ParzenEstimator::new(sim.fs, sim.parzen_l, s_avg.freq())?;
    run_replicates(plan, |r| {
        let curves = (0..plan.m + plan.n)
            .map(|i| {
                let mut rng = substream(plan.seed, &[r as u64, i as u64]);
                let rec = simulate_with_rng(&s_avg, sim.duration, sim.fs, &mut rng)?;
                let est = estimator.estimate(&rec)?;
                Ok(est.to_curve())
            })
            .collect::<Result<Vec<Curve>>>()?;
        let joint = JointSample::from_pooled(FunctionalSample::new(curves, "simulated")?, plan.m)?;
        let g = spec.build(&joint)?;
        let scores = score_matrix(joint.pooled(), &g)?;
        let x_rows: Vec<usize> = joint.x_rows().collect();
        let y_rows: Vec<usize> = joint.y_rows().collect();
        qn_from_rows(&scores.scores, &x_rows, &y_rows)
    })
}

/// Empirical against limiting quantiles of `Q_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    pub probs: Vec<f64>,
    pub empirical: Vec<f64>,
    pub asymptotic: Vec<f64>,
    pub relative_error: Vec<f64>,
}

/// Probabilities reported by default.
pub const DEFAULT_PROBS: [f64; 5] = [0.5, 0.9, 0.95, 0.975, 0.99];

/// Quantile of sorted data by linear interpolation between order
/// statistics: position `(N − 1) p` in zero-based ranks.
pub fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical quantiles of `null_values` beside the χ²ₖ quantiles, with
/// relative error `(asymptotic − empirical) / empirical`.
pub fn quantile_table(null_values: &[f64], k: usize, probs: &[f64]) -> Result<QuantileTable> {
    if null_values.len() < MIN_TABLE_REPLICATES {
        return Err(Error::TooFewReplicates {
            got: null_values.len(),
            need: MIN_TABLE_REPLICATES,
        });
    }
    if let Some(&p) = probs.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::InvalidProbability(p));
    }
    if probs.is_empty() || probs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("probabilities must be strictly increasing".into()));
    }
    if null_values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFiniteValue("null values".into()));
    }
    let mut sorted = null_values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let empirical: Vec<f64> = probs.iter().map(|&p| interpolated_quantile(&sorted, p)).collect();
    let asymptotic = probs
        .iter()
        .map(|&p| chi_square_quantile(p, k))
        .collect::<Result<Vec<_>>>()?;
    let relative_error = asymptotic
        .iter()
        .zip(&empirical)
        .map(|(a, e)| (a - e) / e)
        .collect();
    Ok(QuantileTable {
        probs: probs.to_vec(),
        empirical,
        asymptotic,
        relative_error,
    })
}

impl QuantileTable {
    /// CSV with a header of probabilities and rows `Asymptotic`, `MC`, `Rel. error`.
    pub fn to_csv(&self) -> String {
        let row = |name: &str, v: &[f64]| {
            let mut s = name.to_string();
            for x in v {
                s.push(',');
                s.push_str(&x.to_string());
            }
            s.push('\n');
            s
        };
        let mut out = row("p", &self.probs);
        out += &row("Asymptotic", &self.asymptotic);
        out += &row("MC", &self.empirical);
        out += &row("Rel. error", &self.relative_error);
        out
    }
}

/// How the p-value of a test is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Calibration {
    Asymptotic,
    Permutation { b: usize },
    SpectralMc { b: usize, sim: SpectralSimConfig },
}

impl fmt::Display for Calibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Calibration::Asymptotic => write!(f, "asymptotic"),
            Calibration::Permutation { b } => write!(f, "permutation:B={b}"),
            Calibration::SpectralMc { b, sim } => write!(
                f,
                "spectral-mc:B={b},duration={},fs={},parzen={}",
                sim.duration, sim.fs, sim.parzen_l
            ),
        }
    }
}

impl FromStr for Calibration {
    type Err = Error;

    /// `asymptotic`, `permutation:B=1000`, or
    /// `spectral-mc:B=1000[,duration=1800,fs=1.28,parzen=60]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParams(format!("calibration '{s}': {msg}"));
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut b = None;
        let mut sim = SpectralSimConfig::default();
        for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{kv}'")))?;
            let value = value.trim();
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("'{v}' is not a number")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("'{v}' is not a count")));
            match key.trim() {
                "B" | "b" => b = Some(int(value)?),
                "duration" => sim.duration = num(value)?,
                "fs" => sim.fs = num(value)?,
                "parzen" => sim.parzen_l = int(value)?,
                other => return Err(bad(format!("unknown parameter '{other}'"))),
            }
        }
        match name.trim() {
            "asymptotic" if b.is_none() => Ok(Calibration::Asymptotic),
            "permutation" => Ok(Calibration::Permutation {
                b: b.ok_or_else(|| bad("missing B".into()))?,
            }),
            "spectral-mc" => Ok(Calibration::SpectralMc {
                b: b.ok_or_else(|| bad("missing B".into()))?,
                sim,
            }),
            other => Err(bad(format!("unknown method '{other}'"))),
        }
    }
}

/// Full two-sample test of `x` against `y`.
///
/// The g-functions come from `spec` applied to the joint sample. With
/// spectral Monte Carlo calibration the curves must be spectral densities on
/// a frequency grid over `[0, π·fs]`.
pub fn two_sample_test(
    x: &FunctionalSample,
    y: &FunctionalSample,
    spec: &BasisSpec,
    calibration: &Calibration,
    seed: u64,
    parallel: bool,
) -> Result<TestResult> {
    let joint = JointSample::new(x, y)?;
    let g = spec.build(&joint)?;
    two_sample_test_with_g(&joint, &g, spec, calibration, seed, parallel)
}

/// [`two_sample_test`] with g-functions already built from `joint`.
pub fn two_sample_test_with_g(
    joint: &JointSample,
    g: &GVector,
    spec: &BasisSpec,
    calibration: &Calibration,
    seed: u64,
    parallel: bool,
) -> Result<TestResult> {
    let (m, n) = (joint.m(), joint.n());
    let sx = score_matrix(&joint.x()?, g)?;
    let sy = score_matrix(&joint.y()?, g)?;
    let mut result = qn_statistic(&sx, &sy)?.with_scheme(spec);
    let null = match calibration {
        Calibration::Asymptotic => return Ok(result),
        Calibration::Permutation { b } => {
            let mut plan = ResamplingPlan::new(Method::PermutationSplit, *b, seed, m, n)?;
            plan.parallel = parallel;
            if spec.label_invariant() {
                permutation_null_with_g(joint, g, &plan)?
            } else {
                permutation_null_rebuilding(joint, spec, &plan)?
            }
        }
        Calibration::SpectralMc { b, sim } => {
            let mut plan = ResamplingPlan::new(Method::SpectralMC, *b, seed, m, n)?;
            plan.parallel = parallel;
            let to_spectra = |s: &FunctionalSample| {
                s.curves()
                    .iter()
                    .map(SpectralDensity::from_curve)
                    .collect::<Result<Vec<_>>>()
            };
            spectral_mc_null(&to_spectra(&joint.x()?)?, &to_spectra(&joint.y()?)?, sim, spec, &plan)?
        }
    };
    result.p_resampled = Some(permutation_pvalue(result.qn, &null.values));
    result.n_resamples = Some(null.effective());
    result.failed_replicates = Some(null.failed);
    result.seed = Some(seed);
    Ok(result)
}
