//! Scores, the pooled covariance, and the quadratic-form statistic `Q_n`.
//!
//! For scores `G(X_i)` and `G(Y_j)` against k projection functions,
//!
//! ```text
//! η   = √(m+n) · (mean_i G(X_i) − mean_j G(Y_j))
//! C̃   = (α² + β²)/(m+n−2) · ((m−1) C̃_X + (n−1) C̃_Y),  α² = (m+n)/m, β² = (m+n)/n
//! Q_n = ηᵀ C̃⁻¹ η
//! ```
//!
//! which is asymptotically χ²ₖ under equality of the two laws.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chisq::chi_square_sf;
use crate::error::{Error, Result};
use crate::functional::{same_grid, FunctionalSample};
use crate::projections::{BasisSpec, GVector};

/// Largest condition number of the pooled covariance accepted by the solve.
pub const MAX_COVARIANCE_CONDITION: f64 = 1e12;

/// Dot-product scores: entry `(i, j)` is `∫ x_i(t) g_j(t) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub scores: DMatrix<f64>,
    pub sample_label: String,
}

impl ScoreMatrix {
    pub fn new(scores: DMatrix<f64>, sample_label: impl Into<String>) -> Result<Self> {
        if scores.ncols() == 0 {
            return Err(Error::InvalidK(0));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("score matrix".into()));
        }
        Ok(Self {
            scores,
            sample_label: sample_label.into(),
        })
    }

    pub fn n_curves(&self) -> usize {
        self.scores.nrows()
    }

    pub fn k(&self) -> usize {
        self.scores.ncols()
    }
}

/// Scores of every curve against every g-function (trapezoid quadrature).
pub fn score_matrix(sample: &FunctionalSample, g: &GVector) -> Result<ScoreMatrix> {
    if !same_grid(sample.grid(), g.grid()) {
        return Err(Error::GridMismatch);
    }
    let w = sample.grid().weights();
    let n_points = w.len();
    let weighted = DMatrix::from_fn(sample.len(), n_points, |i, t| {
        sample.curves()[i].values()[t] * w[t]
    });
    let gmat = DMatrix::from_fn(n_points, g.k(), |t, j| g.functions()[j].values()[t]);
    ScoreMatrix::new(weighted * gmat, sample.label())
}

/// The pooled covariance estimate `C̃` together with the sizes it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledCovariance {
    pub matrix: DMatrix<f64>,
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

fn check_pair(sx: &ScoreMatrix, sy: &ScoreMatrix) -> Result<()> {
    if sx.k() != sy.k() {
        return Err(Error::DimensionMismatch(format!(
            "X scores have {} columns, Y scores {}",
            sx.k(),
            sy.k()
        )));
    }
    if sx.n_curves() == 0 || sy.n_curves() == 0 {
        return Err(Error::EmptySample);
    }
    Ok(())
}

fn column_means(s: &DMatrix<f64>, rows: &[usize]) -> DVector<f64> {
    let mut mean = DVector::zeros(s.ncols());
    for &i in rows {
        mean += s.row(i).transpose();
    }
    mean / rows.len() as f64
}

/// Sum of outer products of centered rows (the unscaled scatter matrix).
fn scatter(s: &DMatrix<f64>, rows: &[usize], mean: &DVector<f64>) -> DMatrix<f64> {
    let k = s.ncols();
    let mut out = DMatrix::zeros(k, k);
    for &i in rows {
        let d = s.row(i).transpose() - mean;
        out.ger(1.0, &d, &d, 1.0);
    }
    out
}

/// `η = √(m+n)(x̄ − ȳ)`, coordinate-wise over the g-functions.
pub fn eta_vector(sx: &ScoreMatrix, sy: &ScoreMatrix) -> Result<DVector<f64>> {
    check_pair(sx, sy)?;
    let xs: Vec<usize> = (0..sx.n_curves()).collect();
    let ys: Vec<usize> = (0..sy.n_curves()).collect();
    let total = (sx.n_curves() + sy.n_curves()) as f64;
    Ok((column_means(&sx.scores, &xs) - column_means(&sy.scores, &ys)) * total.sqrt())
}

/// Pooled covariance of the two score samples, scaled by `(α²+β²)/(m+n−2)`.
pub fn pooled_covariance(sx: &ScoreMatrix, sy: &ScoreMatrix) -> Result<PooledCovariance> {
    check_pair(sx, sy)?;
    let xs: Vec<usize> = (0..sx.n_curves()).collect();
    let ys: Vec<usize> = (0..sy.n_curves()).collect();
    let parts = Parts::compute(&sx.scores, &xs, &sy.scores, &ys)?;
    Ok(parts.covariance)
}

/// Everything the statistic needs from one labeling of the rows.
struct Parts {
    eta: DVector<f64>,
    covariance: PooledCovariance,
}

impl Parts {
    fn compute(sx: &DMatrix<f64>, xs: &[usize], sy: &DMatrix<f64>, ys: &[usize]) -> Result<Self> {
        let (m, n) = (xs.len(), ys.len());
        if m < 2 || n < 2 {
            return Err(Error::TooFewCurves { m, n });
        }
        let total = (m + n) as f64;
        let mx = column_means(sx, xs);
        let my = column_means(sy, ys);
        let eta = (&mx - &my) * total.sqrt();
        // (m−1)C̃_X + (n−1)C̃_Y is the sum of the two scatter matrices.
        let pooled_scatter = scatter(sx, xs, &mx) + scatter(sy, ys, &my);
        let alpha2 = total / m as f64;
        let beta2 = total / n as f64;
        let factor = (alpha2 + beta2) / (total - 2.0);
        let mut matrix = pooled_scatter * factor;
        // Exact symmetry.
        let k = matrix.nrows();
        for i in 0..k {
            for j in 0..i {
                let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        Ok(Self {
            eta,
            covariance: PooledCovariance {
                matrix,
                m,
                n,
                alpha: alpha2.sqrt(),
                beta: beta2.sqrt(),
            },
        })
    }

    fn quadratic_form(&self) -> Result<f64> {
        let c = &self.covariance.matrix;
        let k = c.nrows();
        if k + 2 > self.covariance.m + self.covariance.n {
            log::warn!(
                "k = {k} exceeds m + n - 2 = {}; pooled covariance is rank deficient",
                self.covariance.m + self.covariance.n - 2
            );
        }
        let eig = c.clone().symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= MAX_COVARIANCE_CONDITION) {
            return Err(Error::SingularCovariance(condition));
        }
        let chol = c
            .clone()
            .cholesky()
            .ok_or(Error::SingularCovariance(condition))?;
        let z = chol.solve(&self.eta);
        Ok(self.eta.dot(&z).max(0.0))
    }
}

/// `Q_n` for the rows `xs` (group X) and `ys` (group Y) of one score matrix.
pub(crate) fn qn_from_rows(scores: &DMatrix<f64>, xs: &[usize], ys: &[usize]) -> Result<f64> {
    Parts::compute(scores, xs, scores, ys)?.quadratic_form()
}

/// Outcome of a two-sample test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub qn: f64,
    pub k: usize,
    pub p_asymptotic: f64,
    pub p_resampled: Option<f64>,
    pub n_resamples: Option<usize>,
    pub scheme: Option<String>,
    pub params: Option<BasisSpec>,
    pub seed: Option<u64>,
    pub m: usize,
    pub n: usize,
    pub eta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_replicates: Option<usize>,
}

impl TestResult {
    /// Attaches the g-function scheme that produced the scores.
    pub fn with_scheme(mut self, spec: &BasisSpec) -> Self {
        self.scheme = Some(spec.scheme_name().to_string());
        self.params = Some(spec.clone());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("TestResult serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line() as u64,
            msg: e.to_string(),
        })
    }
}

/// `Q_n = ηᵀ C̃⁻¹ η` with its asymptotic χ²ₖ p-value.
pub fn qn_statistic(sx: &ScoreMatrix, sy: &ScoreMatrix) -> Result<TestResult> {
    check_pair(sx, sy)?;
    let xs: Vec<usize> = (0..sx.n_curves()).collect();
    let ys: Vec<usize> = (0..sy.n_curves()).collect();
    let parts = Parts::compute(&sx.scores, &xs, &sy.scores, &ys)?;
    let qn = parts.quadratic_form()?;
    let k = sx.k();
    Ok(TestResult {
        qn,
        k,
        p_asymptotic: chi_square_sf(qn, k)?,
        p_resampled: None,
        n_resamples: None,
        scheme: None,
        params: None,
        seed: None,
        m: xs.len(),
        n: ys.len(),
        eta: parts.eta.as_slice().to_vec(),
        failed_replicates: None,
    })
}
