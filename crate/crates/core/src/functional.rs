//! Functional data on a shared grid.
//!
//! Curves are stored as values on a [`Grid`]; integrals use the trapezoidal
//! rule on that grid, so every inner product is a weighted dot product with
//! the grid's quadrature weights.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A closed interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn approx_eq(&self, other: &Interval, tol: f64) -> bool {
        (self.a - other.a).abs() <= tol && (self.b - other.b).abs() <= tol
    }
}

/// Strictly increasing evaluation points spanning an interval, with their
/// trapezoidal quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    interval: Interval,
    weights: Vec<f64>,
}

impl Grid {
    /// Builds a grid from explicit points; the interval is `[first, last]`.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteValue(format!("grid point {i}")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points not strictly increasing at index {}",
                i + 1
            )));
        }
        let interval = Interval::new(points[0], points[points.len() - 1])?;
        let weights = trapezoid_weights(&points);
        Ok(Self {
            points,
            interval,
            weights,
        })
    }

    /// `n` equally spaced points from `a` to `b` inclusive.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        Interval::new(a, b)?;
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
        }
        let h = (b - a) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        points[n - 1] = b;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Trapezoid integral of values sampled on this grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.points.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = points[i + 1] - points[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// True when both handles refer to the same grid (by identity or by value).
pub fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

/// A real function sampled on a grid.
#[derive(Debug, Clone)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "curve has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("curve value {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Trapezoid integral of the curve over its interval.
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }
}

/// Quadrature approximation of `∫_J f(t) g(t) dt` (trapezoidal rule).
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    if !same_grid(&f.grid, &g.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(f.grid
        .weights()
        .iter()
        .zip(f.values.iter().zip(&g.values))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// A non-empty set of curves on one grid.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    grid: Arc<Grid>,
    curves: Vec<Curve>,
    label: String,
}

impl FunctionalSample {
    pub fn new(curves: Vec<Curve>, label: impl Into<String>) -> Result<Self> {
        let first = curves.first().ok_or(Error::EmptySample)?;
        let grid = first.grid.clone();
        if curves.iter().any(|c| !same_grid(&grid, &c.grid)) {
            return Err(Error::GridMismatch);
        }
        // Re-point every curve at one shared grid allocation.
        let curves = curves
            .into_iter()
            .map(|c| Curve {
                grid: grid.clone(),
                values: c.values,
            })
            .collect();
        Ok(Self {
            grid,
            curves,
            label: label.into(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn interval(&self) -> Interval {
        self.grid.interval()
    }

    /// Curves as rows of a dense matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.grid.len(), |i, j| self.curves[i].values[j])
    }

    /// A new sample built from a subset of rows, in the order given.
    pub fn select(&self, rows: &[usize], label: impl Into<String>) -> Result<Self> {
        let curves = rows.iter().map(|&i| self.curves[i].clone()).collect();
        Self::new(curves, label)
    }

    /// Applies `f` to each curve's values, keeping the grid.
    pub fn map_values(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let curves = self
            .curves
            .iter()
            .map(|c| Curve::new(self.grid.clone(), f(&c.values)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves, self.label.clone())
    }
}

/// Builds a sample with one curve per row of `values`.
pub fn make_sample(
    grid: Arc<Grid>,
    values: &[Vec<f64>],
    label: impl Into<String>,
) -> Result<FunctionalSample> {
    let curves = values
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Curve::new(grid.clone(), row.clone()).map_err(|e| match e {
                Error::DimensionMismatch(msg) => Error::DimensionMismatch(format!("row {i}: {msg}")),
                Error::NonFiniteValue(msg) => Error::NonFiniteValue(format!("row {i}, {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FunctionalSample::new(curves, label)
}

/// Two samples pooled into one, remembering which rows came from which group.
///
/// Rows `0..m` are the X sample and rows `m..m+n` the Y sample.
#[derive(Debug, Clone)]
pub struct JointSample {
    pooled: FunctionalSample,
    m: usize,
}

impl JointSample {
    pub fn new(x: &FunctionalSample, y: &FunctionalSample) -> Result<Self> {
        if !same_grid(x.grid(), y.grid()) {
            return Err(Error::GridMismatch);
        }
        let curves = x.curves.iter().chain(&y.curves).cloned().collect();
        let label = format!("{}+{}", x.label, y.label);
        Ok(Self {
            pooled: FunctionalSample::new(curves, label)?,
            m: x.len(),
        })
    }

    /// Splits an existing pooled sample so that the first `m` rows form X.
    pub fn from_pooled(pooled: FunctionalSample, m: usize) -> Result<Self> {
        if m == 0 || m >= pooled.len() {
            return Err(Error::DimensionMismatch(format!(
                "group size {m} invalid for pooled sample of {}",
                pooled.len()
            )));
        }
        Ok(Self { pooled, m })
    }

    pub fn pooled(&self) -> &FunctionalSample {
        &self.pooled
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.pooled.len() - self.m
    }

    pub fn x_rows(&self) -> std::ops::Range<usize> {
        0..self.m
    }

    pub fn y_rows(&self) -> std::ops::Range<usize> {
        self.m..self.pooled.len()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.pooled.grid()
    }

    /// The pooled rows relabeled: `x_idx` become X and `y_idx` become Y.
    pub fn relabel(&self, x_idx: &[usize], y_idx: &[usize]) -> Result<Self> {
        let rows: Vec<usize> = x_idx.iter().chain(y_idx).copied().collect();
        Self::from_pooled(self.pooled.select(&rows, self.pooled.label.clone())?, x_idx.len())
    }

    pub fn x(&self) -> Result<FunctionalSample> {
        let rows: Vec<usize> = self.x_rows().collect();
        self.pooled.select(&rows, "X")
    }

    pub fn y(&self) -> Result<FunctionalSample> {
        let rows: Vec<usize> = self.y_rows().collect();
        self.pooled.select(&rows, "Y")
    }
}
