//! Construction of the projection functions `g̃ = (g̃₁, …, g̃ₖ)`.
//!
//! Four schemes are available: indicators of equal subintervals, a clamped
//! B-spline basis, data-driven odd/even trigonometric combinations, and
//! eigenfunctions of a pooled covariance operator. The last two are built
//! from the joint sample.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bspline::BSplineSpec;
use crate::error::{Error, Result};
use crate::functional::{inner_product, same_grid, Curve, FunctionalSample, Grid, Interval, JointSample};

/// Which trigonometric functions to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigParts {
    /// Odd (sine) and even (cosine) combinations, k = 2.
    Both,
    /// Only the sine combination, k = 1.
    Odd,
}

/// How the two groups' covariance operators are pooled for functional PCA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolWeights {
    /// `θ = 1/2`.
    Equal,
    /// `θ = n₁ / (n₁ + n₂)`.
    Proportion,
    /// Covariance of the unlabeled pooled sample about its overall mean.
    Joint,
}

/// Descriptor of a g-function construction; also the serialized parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum BasisSpec {
    Indicator { k: usize },
    Bspline { order: usize, interior: usize },
    Trig { k_max: usize, parts: TrigParts },
    Pca { d: usize, weights: PoolWeights },
    /// Functions supplied directly rather than built by a scheme.
    Custom { k: usize },
}

impl BasisSpec {
    /// Number of g-functions this scheme produces.
    pub fn k(&self) -> usize {
        match self {
            BasisSpec::Indicator { k } | BasisSpec::Custom { k } => *k,
            BasisSpec::Bspline { order, interior } => order + interior,
            BasisSpec::Trig { parts, .. } => match parts {
                TrigParts::Both => 2,
                TrigParts::Odd => 1,
            },
            BasisSpec::Pca { d, .. } => *d,
        }
    }

    pub fn scheme_name(&self) -> &'static str {
        match self {
            BasisSpec::Indicator { .. } => "indicator",
            BasisSpec::Bspline { .. } => "bspline",
            BasisSpec::Trig { .. } => "trig",
            BasisSpec::Pca { .. } => "pca",
            BasisSpec::Custom { .. } => "custom",
        }
    }

    /// Whether the functions are estimated from the data.
    pub fn data_driven(&self) -> bool {
        matches!(self, BasisSpec::Trig { .. } | BasisSpec::Pca { .. })
    }

    /// True when relabeling the pooled rows cannot change the functions.
    pub fn label_invariant(&self) -> bool {
        !matches!(
            self,
            BasisSpec::Pca {
                weights: PoolWeights::Equal | PoolWeights::Proportion,
                ..
            }
        )
    }

    /// Builds the g-functions on the joint sample's grid. Fixed schemes use
    /// the grid's interval.
    pub fn build(&self, joint: &JointSample) -> Result<GVector> {
        let grid = joint.grid();
        let interval = grid.interval();
        match *self {
            BasisSpec::Indicator { k } => indicator_basis(interval, k, grid),
            BasisSpec::Bspline { order, interior } => bspline_basis_g(interval, order, interior, grid),
            BasisSpec::Trig { k_max, parts } => trig_g_functions(joint.pooled(), k_max, parts),
            BasisSpec::Pca { d, weights } => pca_basis(joint, d, weights).map(|p| p.into_gvector(weights)),
            BasisSpec::Custom { .. } => Err(Error::InvalidParams(
                "custom g-functions cannot be rebuilt from data".into(),
            )),
        }
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisSpec::Indicator { k } => write!(f, "indicator:k={k}"),
            BasisSpec::Bspline { order, interior } => write!(f, "bspline:order={order},interior={interior}"),
            BasisSpec::Trig { k_max, parts } => {
                let p = match parts {
                    TrigParts::Both => "both",
                    TrigParts::Odd => "odd",
                };
                write!(f, "trig:k={k_max},parts={p}")
            }
            BasisSpec::Pca { d, weights } => {
                let w = match weights {
                    PoolWeights::Equal => "equal",
                    PoolWeights::Proportion => "proportion",
                    PoolWeights::Joint => "joint",
                };
                write!(f, "pca:d={d},weights={w}")
            }
            BasisSpec::Custom { k } => write!(f, "custom:k={k}"),
        }
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    /// Parses `indicator:k=8`, `bspline:order=5,interior=7`,
    /// `trig:k=3,parts=both|odd` or `pca:d=3[,weights=proportion|equal|joint]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParams(format!("basis '{s}': {msg}"));
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{part}'")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let int = |key: &str, default: Option<usize>| -> Result<usize> {
            match kv.get(key) {
                Some(v) => v.parse().map_err(|_| bad(format!("'{key}' must be an integer"))),
                None => default.ok_or_else(|| bad(format!("missing '{key}'"))),
            }
        };
        let spec = match name.trim() {
            "indicator" => BasisSpec::Indicator { k: int("k", Some(8))? },
            "bspline" => BasisSpec::Bspline {
                order: int("order", Some(5))?,
                interior: int("interior", Some(7))?,
            },
            "trig" => {
                let parts = match kv.get("parts").map(String::as_str).unwrap_or("both") {
                    "both" => TrigParts::Both,
                    "odd" => TrigParts::Odd,
                    other => return Err(bad(format!("unknown parts '{other}'"))),
                };
                BasisSpec::Trig {
                    k_max: int("k", Some(3))?,
                    parts,
                }
            }
            "pca" => {
                let weights = match kv.get("weights").map(String::as_str).unwrap_or("proportion") {
                    "proportion" => PoolWeights::Proportion,
                    "equal" => PoolWeights::Equal,
                    "joint" => PoolWeights::Joint,
                    other => return Err(bad(format!("unknown weights '{other}'"))),
                };
                BasisSpec::Pca { d: int("d", None)?, weights }
            }
            other => return Err(bad(format!("unknown scheme '{other}'"))),
        };
        Ok(spec)
    }
}

/// Extra numbers describing how data-driven functions were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GDetails {
    Trig { a_bar: Vec<f64>, b_bar: Vec<f64> },
    Pca { eigenvalues: Vec<f64> },
}

/// An ordered, non-empty tuple of projection functions on one grid.
#[derive(Debug, Clone)]
pub struct GVector {
    functions: Vec<Curve>,
    spec: BasisSpec,
    details: Option<GDetails>,
}

impl GVector {
    pub fn new(functions: Vec<Curve>, spec: BasisSpec, details: Option<GDetails>) -> Result<Self> {
        let first = functions.first().ok_or(Error::InvalidK(0))?;
        if functions.iter().any(|f| !same_grid(first.grid(), f.grid())) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            functions,
            spec,
            details,
        })
    }

    /// Wraps arbitrary functions.
    pub fn custom(functions: Vec<Curve>) -> Result<Self> {
        let k = functions.len();
        Self::new(functions, BasisSpec::Custom { k }, None)
    }

    pub fn functions(&self) -> &[Curve] {
        &self.functions
    }

    pub fn k(&self) -> usize {
        self.functions.len()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.functions[0].grid()
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn details(&self) -> Option<&GDetails> {
        self.details.as_ref()
    }

    pub fn data_driven(&self) -> bool {
        self.spec.data_driven()
    }

    /// New functions `g'_i = Σ_j a[i, j] g_j`.
    pub fn linear_combination(&self, a: &DMatrix<f64>) -> Result<GVector> {
        if a.ncols() != self.k() {
            return Err(Error::DimensionMismatch(format!(
                "combination matrix has {} columns for {} functions",
                a.ncols(),
                self.k()
            )));
        }
        let grid = self.grid().clone();
        let n = grid.len();
        let functions = (0..a.nrows())
            .map(|i| {
                let mut v = vec![0.0; n];
                for (j, g) in self.functions.iter().enumerate() {
                    let c = a[(i, j)];
                    v.iter_mut().zip(g.values()).for_each(|(x, y)| *x += c * y);
                }
                Curve::new(grid.clone(), v)
            })
            .collect::<Result<Vec<_>>>()?;
        GVector::custom(functions)
    }
}

fn check_grid_covers(interval: Interval, grid: &Grid) -> Result<()> {
    let g = grid.interval();
    let tol = 1e-9 * interval.length();
    if g.a > interval.a + tol || g.b < interval.b - tol {
        return Err(Error::InvalidGrid(format!(
            "grid [{}, {}] does not span [{}, {}]",
            g.a, g.b, interval.a, interval.b
        )));
    }
    Ok(())
}

/// Indicators of the `k` equal subintervals of `interval`, evaluated on `grid`.
///
/// A grid point lying exactly on an interior subinterval boundary gets the
/// value 1/2 in both neighbours, so the functions still sum to one and the
/// trapezoid rule integrates each subinterval exactly when its ends are grid
/// points.
pub fn indicator_basis(interval: Interval, k: usize, grid: &Arc<Grid>) -> Result<GVector> {
    if k < 1 {
        return Err(Error::InvalidK(k));
    }
    check_grid_covers(interval, grid)?;
    let width = interval.length() / k as f64;
    let tol = 1e-12 * interval.length();
    let mut values = vec![vec![0.0; grid.len()]; k];
    for (i, &t) in grid.points().iter().enumerate() {
        if t < interval.a - tol || t > interval.b + tol {
            continue;
        }
        let pos = ((t - interval.a) / width).clamp(0.0, k as f64);
        let j = pos.round() as usize;
        let boundary = interval.a + j as f64 * width;
        if j > 0 && j < k && (t - boundary).abs() <= tol {
            values[j - 1][i] = 0.5;
            values[j][i] = 0.5;
        } else {
            let j = (pos.floor() as usize).min(k - 1);
            values[j][i] = 1.0;
        }
    }
    let functions = values
        .into_iter()
        .map(|v| Curve::new(grid.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    GVector::new(functions, BasisSpec::Indicator { k }, None)
}

/// All `interior_nodes + order` B-splines of the clamped equidistant knot
/// vector on `interval`, evaluated on `grid`.
pub fn bspline_basis_g(
    interval: Interval,
    order: usize,
    interior_nodes: usize,
    grid: &Arc<Grid>,
) -> Result<GVector> {
    if order < 2 {
        return Err(Error::InvalidOrder(order));
    }
    check_grid_covers(interval, grid)?;
    let spec = BSplineSpec::clamped_interior(interval, order, interior_nodes)?;
    let nb = spec.n_basis();
    let mut values = vec![vec![0.0; grid.len()]; nb];
    for (i, &t) in grid.points().iter().enumerate() {
        let t = if (t - interval.b).abs() <= 1e-12 * interval.length() { interval.b } else { t };
        for (j, v) in spec.basis_values(t).into_iter().enumerate() {
            values[j][i] = v;
        }
    }
    let functions = values
        .into_iter()
        .map(|v| Curve::new(grid.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    GVector::new(
        functions,
        BasisSpec::Bspline {
            order,
            interior: interior_nodes,
        },
        None,
    )
}

/// Sine (`a`) and cosine (`b`) Fourier coefficients, curve × harmonic.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub k_max: usize,
}

fn harmonics(grid: &Arc<Grid>, k_max: usize) -> Result<(Vec<Curve>, Vec<Curve>)> {
    let sines = (1..=k_max)
        .map(|l| Curve::from_fn(grid.clone(), |t| (2.0 * PI * l as f64 * t).sin()))
        .collect::<Result<Vec<_>>>()?;
    let cosines = (1..=k_max)
        .map(|l| Curve::from_fn(grid.clone(), |t| (2.0 * PI * l as f64 * t).cos()))
        .collect::<Result<Vec<_>>>()?;
    Ok((sines, cosines))
}

/// `a_il = ∫₀¹ Z_i sin(2πlt) dt`, `b_il = ∫₀¹ Z_i cos(2πlt) dt` for `l = 1..=k_max`.
pub fn fourier_coefficients(joint: &FunctionalSample, k_max: usize) -> Result<FourierCoefficients> {
    let iv = joint.interval();
    if !iv.approx_eq(&Interval::unit(), 1e-9) {
        return Err(Error::WrongInterval { a: iv.a, b: iv.b });
    }
    if k_max < 1 {
        return Err(Error::InvalidK(k_max));
    }
    let (sines, cosines) = harmonics(joint.grid(), k_max)?;
    let n = joint.len();
    let mut a = DMatrix::zeros(n, k_max);
    let mut b = DMatrix::zeros(n, k_max);
    for (i, z) in joint.curves().iter().enumerate() {
        for l in 0..k_max {
            a[(i, l)] = inner_product(z, &sines[l])?;
            b[(i, l)] = inner_product(z, &cosines[l])?;
        }
    }
    Ok(FourierCoefficients { a, b, k_max })
}

/// `g̃₁ = Σ ā_l sin(2πlt)` and (for [`TrigParts::Both`]) `g̃₂ = Σ b̄_l cos(2πlt)`,
/// where `ā_l`, `b̄_l` are mean absolute Fourier coefficients over the joint sample.
pub fn trig_g_functions(joint: &FunctionalSample, k_max: usize, parts: TrigParts) -> Result<GVector> {
    let coefs = fourier_coefficients(joint, k_max)?;
    let n = joint.len() as f64;
    let mean_abs = |m: &DMatrix<f64>| -> Vec<f64> {
        m.column_iter()
            .map(|c| c.iter().map(|x| x.abs()).sum::<f64>() / n)
            .collect()
    };
    let a_bar = mean_abs(&coefs.a);
    let b_bar = mean_abs(&coefs.b);
    let grid = joint.grid();
    let combine = |w: &[f64], f: fn(f64) -> f64| {
        Curve::from_fn(grid.clone(), |t| {
            w.iter()
                .enumerate()
                .map(|(l, c)| c * f(2.0 * PI * (l + 1) as f64 * t))
                .sum()
        })
    };
    let mut functions = vec![combine(&a_bar, f64::sin)?];
    if parts == TrigParts::Both {
        functions.push(combine(&b_bar, f64::cos)?);
    }
    GVector::new(
        functions,
        BasisSpec::Trig { k_max, parts },
        Some(GDetails::Trig { a_bar, b_bar }),
    )
}

/// Leading eigenpairs of a pooled covariance operator.
#[derive(Debug, Clone)]
pub struct PCABasis {
    pub eigenfunctions: Vec<Curve>,
    pub eigenvalues: Vec<f64>,
    pub d: usize,
}

impl PCABasis {
    pub fn into_gvector(self, weights: PoolWeights) -> GVector {
        GVector {
            functions: self.eigenfunctions,
            spec: BasisSpec::Pca { d: self.d, weights },
            details: Some(GDetails::Pca {
                eigenvalues: self.eigenvalues,
            }),
        }
    }
}

/// Rows of `rows` centered at their mean, scaled by `sqrt(scale)` and by the
/// square-root quadrature weights.
fn weighted_centered(data: &DMatrix<f64>, rows: std::ops::Range<usize>, scale: f64, sqrt_w: &[f64]) -> DMatrix<f64> {
    let g = data.ncols();
    let n = rows.len();
    let mut out = DMatrix::zeros(n, g);
    for j in 0..g {
        let mean = rows.clone().map(|i| data[(i, j)]).sum::<f64>() / n as f64;
        for (r, i) in rows.clone().enumerate() {
            out[(r, j)] = (data[(i, j)] - mean) * scale.sqrt() * sqrt_w[j];
        }
    }
    out
}

/// Top-`d` eigenpairs of the pooled covariance operator of the joint sample.
///
/// The operator is discretized as `W^{1/2} Z W^{1/2}` with the diagonal
/// trapezoid weights `W`; eigenfunctions have unit L2 norm and a
/// non-negative integral (ties broken by making the largest-magnitude value
/// positive).
pub fn pca_basis(joint: &JointSample, d: usize, weights: PoolWeights) -> Result<PCABasis> {
    let grid = joint.grid().clone();
    let g = grid.len();
    if d < 1 || d > g {
        return Err(Error::InvalidK(d));
    }
    let data = joint.pooled().to_matrix();
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let (m, n) = (joint.m(), joint.n());
    let a = match weights {
        PoolWeights::Joint => {
            let total = m + n;
            if total < 2 {
                return Err(Error::TooFewCurves { m, n });
            }
            weighted_centered(&data, 0..total, 1.0 / (total - 1) as f64, &sqrt_w)
        }
        PoolWeights::Equal | PoolWeights::Proportion => {
            if m < 2 || n < 2 {
                return Err(Error::TooFewCurves { m, n });
            }
            let theta = match weights {
                PoolWeights::Equal => 0.5,
                _ => m as f64 / (m + n) as f64,
            };
            let ax = weighted_centered(&data, joint.x_rows(), (1.0 - theta) / (m - 1) as f64, &sqrt_w);
            let ay = weighted_centered(&data, joint.y_rows(), theta / (n - 1) as f64, &sqrt_w);
            let mut a = DMatrix::zeros(m + n, g);
            a.view_mut((0, 0), (m, g)).copy_from(&ax);
            a.view_mut((m, 0), (n, g)).copy_from(&ay);
            a
        }
    };
    let op = a.tr_mul(&a);
    let eig = SymmetricEigen::new(op);
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let leading = eig.eigenvalues[order[0]].max(0.0);
    let eigenvalues: Vec<f64> = order[..d]
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .collect();
    if let Some((idx, &v)) = eigenvalues
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= 1e-12 * leading) || leading <= 0.0)
    {
        return Err(Error::DegenerateCovariance {
            index: idx + 1,
            value: v,
            leading,
        });
    }
    let tie_tol = 1e-10 * grid.interval().length().sqrt();
    let eigenfunctions = order[..d]
        .iter()
        .map(|&col| {
            let u = eig.eigenvectors.column(col);
            let mut phi: Vec<f64> = u.iter().zip(&sqrt_w).map(|(x, s)| x / s).collect();
            let integral = grid.integrate(&phi);
            let flip = if integral.abs() > tie_tol {
                integral < 0.0
            } else {
                let peak = phi.iter().cloned().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
                peak < 0.0
            };
            if flip {
                phi.iter_mut().for_each(|x| *x = -*x);
            }
            Curve::new(grid.clone(), phi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PCABasis {
        eigenfunctions,
        eigenvalues,
        d,
    })
}
