//! Clamped B-splines: basis evaluation, interpolation through data points,
//! and least-squares projection of sampled curves onto a spline space.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functional::{Curve, FunctionalSample, Grid, Interval};

/// Largest condition number accepted for a least-squares normal system.
pub const DEFAULT_CONDITION_BOUND: f64 = 1e12;

/// Order (degree + 1) and full knot vector of a clamped B-spline space.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineSpec {
    order: usize,
    knots: Vec<f64>,
}

impl BSplineSpec {
    /// Validates a full knot vector with `order`-fold boundary knots.
    pub fn new(order: usize, knots: Vec<f64>) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidOrder(order));
        }
        if knots.len() < 2 * order {
            return Err(Error::InvalidSpline(format!(
                "{} knots is too few for order {order}",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSpline("knots must be finite and non-decreasing".into()));
        }
        let a = knots[0];
        let b = knots[knots.len() - 1];
        Interval::new(a, b)?;
        let head = &knots[..order];
        let tail = &knots[knots.len() - order..];
        if head.iter().any(|&k| k != a) || tail.iter().any(|&k| k != b) {
            return Err(Error::InvalidSpline(format!(
                "boundary knots need multiplicity {order}"
            )));
        }
        if knots[order..knots.len() - order]
            .iter()
            .any(|&k| k <= a || k >= b)
        {
            return Err(Error::InvalidSpline("interior knots must lie strictly inside".into()));
        }
        Ok(Self { order, knots })
    }

    /// Clamped knots with `interior` equally spaced interior knots.
    pub fn clamped_interior(interval: Interval, order: usize, interior: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidOrder(order));
        }
        let mut knots = vec![interval.a; order];
        let step = interval.length() / (interior + 1) as f64;
        knots.extend((1..=interior).map(|j| interval.a + j as f64 * step));
        knots.extend(std::iter::repeat_n(interval.b, order));
        Self::new(order, knots)
    }

    /// Clamped knots at `sites` equally spaced knot sites, endpoints included.
    pub fn clamped_uniform(interval: Interval, order: usize, sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidSpline(format!("need at least 2 knot sites, got {sites}")));
        }
        Self::clamped_interior(interval, order, sites - 2)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn interval(&self) -> Interval {
        Interval {
            a: self.knots[0],
            b: self.knots[self.knots.len() - 1],
        }
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.order
    }

    /// Index `mu` of the knot span containing `t`, with `knots[mu] <= t < knots[mu+1]`;
    /// the right endpoint belongs to the last non-empty span.
    fn span(&self, t: f64) -> usize {
        let p = self.order - 1;
        let n = self.n_basis();
        if t >= self.knots[n] {
            return n - 1;
        }
        if t <= self.knots[p] {
            return p;
        }
        // upper_bound over knots[p..=n]
        let slice = &self.knots[p..=n];
        let idx = slice.partition_point(|&k| k <= t);
        p + idx - 1
    }

    /// Values of all basis functions at `t` (zero outside the interval).
    pub fn basis_values(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis()];
        let iv = self.interval();
        if t < iv.a || t > iv.b {
            return out;
        }
        let (mu, local) = self.nonzero_basis(t);
        let p = self.order - 1;
        for (j, v) in local.into_iter().enumerate() {
            out[mu - p + j] = v;
        }
        out
    }

    /// The `order` possibly non-zero basis values at `t`, starting at index `mu - p`.
    fn nonzero_basis(&self, t: f64) -> (usize, Vec<f64>) {
        let p = self.order - 1;
        let mu = self.span(t);
        let k = &self.knots;
        let mut n = vec![0.0; p + 1];
        n[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = t - k[mu + 1 - j];
            right[j] = k[mu + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (mu, n)
    }

    /// Dense collocation matrix: row i holds the basis values at `ts[i]`.
    pub fn design_matrix(&self, ts: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(ts.len(), self.n_basis());
        let p = self.order - 1;
        for (i, &t) in ts.iter().enumerate() {
            let (mu, local) = self.nonzero_basis(t);
            for (j, v) in local.into_iter().enumerate() {
                b[(i, mu - p + j)] = v;
            }
        }
        b
    }
}

/// A spline function: a spec plus coefficients.
#[derive(Debug, Clone)]
pub struct SplineFunction {
    spec: BSplineSpec,
    coefs: Vec<f64>,
}

impl SplineFunction {
    pub fn spec(&self) -> &BSplineSpec {
        &self.spec
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coefs
    }

    pub fn eval(&self, t: f64) -> f64 {
        let iv = self.spec.interval();
        let t = t.clamp(iv.a, iv.b);
        let (mu, local) = self.spec.nonzero_basis(t);
        let p = self.spec.order - 1;
        local
            .iter()
            .enumerate()
            .map(|(j, v)| v * self.coefs[mu - p + j])
            .sum()
    }
}

/// Interpolating spline through `(ts[i], ys[i])`.
///
/// Uses clamped knots at the data ends and interior knots placed by averaging
/// consecutive data sites, which satisfies the Schoenberg–Whitney conditions.
/// The order is reduced to the number of points when there are too few.
pub fn interpolate(ts: &[f64], ys: &[f64], order: usize) -> Result<SplineFunction> {
    if ts.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sites vs {} values",
            ts.len(),
            ys.len()
        )));
    }
    let n = ts.len();
    if n < 2 {
        return Err(Error::InvalidSpline("need at least 2 points to interpolate".into()));
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpline("interpolation sites must increase".into()));
    }
    let order = order.clamp(2, n);
    let mut knots = vec![ts[0]; order];
    for j in 1..=(n - order) {
        let avg = ts[j..j + order - 1].iter().sum::<f64>() / (order - 1) as f64;
        knots.push(avg);
    }
    knots.extend(std::iter::repeat_n(ts[n - 1], order));
    let spec = BSplineSpec::new(order, knots)?;
    let b = spec.design_matrix(ts);
    let coefs = b
        .lu()
        .solve(&DVector::from_column_slice(ys))
        .ok_or_else(|| Error::InvalidSpline("singular collocation matrix".into()))?;
    Ok(SplineFunction {
        spec,
        coefs: coefs.as_slice().to_vec(),
    })
}

enum Solver {
    Normal(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Kkt(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Least-squares fit of grid samples onto a spline space, optionally pinning
/// the fitted value at chosen abscissae.
///
/// The normal system is factored once, so projecting many curves that share
/// a grid costs one back-substitution each.
pub struct BSplineProjector {
    spec: BSplineSpec,
    design: DMatrix<f64>,
    pins: Vec<f64>,
    solver: Solver,
    condition: f64,
}

impl BSplineProjector {
    pub fn new(grid: &Grid, spec: &BSplineSpec, pins: &[f64], condition_bound: f64) -> Result<Self> {
        let giv = grid.interval();
        let siv = spec.interval();
        let tol = 1e-9 * giv.length().max(1.0);
        if !giv.approx_eq(&siv, tol) {
            return Err(Error::InvalidSpline(format!(
                "spline interval [{}, {}] does not match grid interval [{}, {}]",
                siv.a, siv.b, giv.a, giv.b
            )));
        }
        let k = spec.n_basis();
        if k > grid.len() {
            return Err(Error::InvalidSpline(format!(
                "{k} basis functions exceed {} grid points",
                grid.len()
            )));
        }
        let design = spec.design_matrix(grid.points());
        let gram = design.transpose() * &design;
        let constraint = spec.design_matrix(pins);
        let regularized = &gram + constraint.transpose() * &constraint;
        let eig = regularized.clone().symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition > condition_bound {
            return Err(Error::IllConditioned(condition));
        }
        let solver = if pins.is_empty() {
            Solver::Normal(gram.cholesky().ok_or(Error::IllConditioned(f64::INFINITY))?)
        } else {
            let r = pins.len();
            let mut kkt = DMatrix::zeros(k + r, k + r);
            kkt.view_mut((0, 0), (k, k)).copy_from(&gram);
            kkt.view_mut((k, 0), (r, k)).copy_from(&constraint);
            kkt.view_mut((0, k), (k, r)).copy_from(&constraint.transpose());
            Solver::Kkt(kkt.lu())
        };
        Ok(Self {
            spec: spec.clone(),
            design,
            pins: pins.to_vec(),
            solver,
            condition,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Spline coefficients fitting `values`; `pin_values` gives the required
    /// value at each pin.
    pub fn fit(&self, values: &[f64], pin_values: &[f64]) -> Result<SplineFunction> {
        if values.len() != self.design.nrows() || pin_values.len() != self.pins.len() {
            return Err(Error::DimensionMismatch("projector input length".into()));
        }
        let rhs = self.design.tr_mul(&DVector::from_column_slice(values));
        let coefs = match &self.solver {
            Solver::Normal(ch) => ch.solve(&rhs),
            Solver::Kkt(lu) => {
                let k = rhs.len();
                let mut full = DVector::zeros(k + pin_values.len());
                full.rows_mut(0, k).copy_from(&rhs);
                for (i, v) in pin_values.iter().enumerate() {
                    full[k + i] = *v;
                }
                let sol = lu
                    .solve(&full)
                    .ok_or(Error::IllConditioned(f64::INFINITY))?;
                sol.rows(0, k).into_owned()
            }
        };
        Ok(SplineFunction {
            spec: self.spec.clone(),
            coefs: coefs.as_slice().to_vec(),
        })
    }

    /// Fits and re-evaluates on the projector's grid.
    pub fn project(&self, values: &[f64], pin_values: &[f64]) -> Result<Vec<f64>> {
        let f = self.fit(values, pin_values)?;
        let c = DVector::from_vec(f.coefs);
        Ok((&self.design * c).as_slice().to_vec())
    }
}

/// Least-squares projection of every curve onto the spline space, evaluated
/// back on the sample's grid.
pub fn to_bspline(sample: &FunctionalSample, spec: &BSplineSpec) -> Result<FunctionalSample> {
    to_bspline_with_bound(sample, spec, DEFAULT_CONDITION_BOUND)
}

pub fn to_bspline_with_bound(
    sample: &FunctionalSample,
    spec: &BSplineSpec,
    condition_bound: f64,
) -> Result<FunctionalSample> {
    let grid: &Arc<Grid> = sample.grid();
    let proj = BSplineProjector::new(grid, spec, &[], condition_bound)?;
    let curves = sample
        .curves()
        .iter()
        .map(|c| Curve::new(grid.clone(), proj.project(c.values(), &[])?))
        .collect::<Result<Vec<_>>>()?;
    FunctionalSample::new(curves, sample.label())
}
