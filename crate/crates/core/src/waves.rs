//! Individual waves from surface-elevation records: mean-level downcrossing
//! segmentation, registration onto a common `[0, 1]` grid, and normalization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bspline::{interpolate, BSplineProjector, BSplineSpec, SplineFunction, DEFAULT_CONDITION_BOUND};
use crate::error::{Error, Result};
use crate::functional::{Curve, FunctionalSample, Grid, Interval};
use crate::spectra::TimeSeriesRecord;

/// Waves with fewer interior samples than this are dropped by [`build_wave_set`].
pub const MIN_INTERIOR_SAMPLES: usize = 4;

/// One wave between consecutive downcrossings of the record mean.
///
/// `raw_times` and `raw_values` include the two interpolated crossings as
/// first and last points, where the value is exactly 0.
#[derive(Debug, Clone)]
pub struct WaveRecord {
    pub raw_times: Vec<f64>,
    pub raw_values: Vec<f64>,
    pub period: f64,
    pub registered: Option<Curve>,
    pub upcross_fraction: Option<f64>,
}

impl WaveRecord {
    pub fn t_start(&self) -> f64 {
        self.raw_times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.raw_times[self.raw_times.len() - 1]
    }

    /// Number of record samples strictly inside the wave.
    pub fn interior_samples(&self) -> usize {
        self.raw_times.len() - 2
    }

    /// Time of the first interpolated upcrossing of 0, if any.
    pub fn upcrossing_time(&self) -> Option<f64> {
        let (t, v) = (&self.raw_times, &self.raw_values);
        (0..t.len() - 1)
            .find(|&j| v[j] <= 0.0 && v[j + 1] > 0.0)
            .map(|j| t[j] + (t[j + 1] - t[j]) * (-v[j]) / (v[j + 1] - v[j]))
            .filter(|&tu| tu > t[0] && tu < t[t.len() - 1])
    }
}

/// Common grid and spline space used to register waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationSpec {
    pub n_grid: usize,
    pub spline_order: usize,
    pub n_knots: usize,
    pub constrain_upcross: bool,
}

impl Default for RegistrationSpec {
    fn default() -> Self {
        Self {
            n_grid: 101,
            spline_order: 6,
            n_knots: 61,
            constrain_upcross: false,
        }
    }
}

impl RegistrationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 2 {
            return Err(Error::InvalidGrid(format!("n_grid must be at least 2, got {}", self.n_grid)));
        }
        if self.spline_order < 2 {
            return Err(Error::InvalidOrder(self.spline_order));
        }
        if self.n_knots < 2 {
            return Err(Error::InvalidSpline(format!("need at least 2 knots, got {}", self.n_knots)));
        }
        Ok(())
    }
}

/// Times where the linearly interpolated record crosses `level` downward.
///
/// A crossing sits between samples `i` and `i+1` when `v[i] > level` and
/// `v[i+1] <= level`; a sample exactly at the level counts as below.
pub fn downcrossings(rec: &TimeSeriesRecord, level: f64) -> Vec<f64> {
    crossing_positions(&rec.values, level)
        .into_iter()
        .map(|(i, frac)| rec.time(i) + frac / rec.fs)
        .collect()
}

/// `(i, frac)` for each downcrossing, at sample position `i + frac`.
fn crossing_positions(values: &[f64], level: f64) -> Vec<(usize, f64)> {
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > level && w[1] <= level)
        .map(|(i, w)| (i, (w[0] - level) / (w[0] - w[1])))
        .collect()
}

/// Splits the mean-removed record into waves between consecutive downcrossings.
pub fn segment_waves(rec: &TimeSeriesRecord) -> Result<Vec<WaveRecord>> {
    if rec.len() < 2 {
        return Err(Error::NoWaves);
    }
    let mean = rec.mean();
    let centered: Vec<f64> = rec.values.iter().map(|v| v - mean).collect();
    let crossings = crossing_positions(&centered, 0.0);
    if crossings.len() < 2 {
        return Err(Error::NoWaves);
    }
    let waves = crossings
        .windows(2)
        .map(|pair| {
            let (ia, fa) = pair[0];
            let (ib, fb) = pair[1];
            let ta = rec.time(ia) + fa / rec.fs;
            let tb = rec.time(ib) + fb / rec.fs;
            let mut raw_times = vec![ta];
            let mut raw_values = vec![0.0];
            // Samples ia+1 ..= ib lie in the wave; one that coincides with a
            // crossing (fraction exactly 1) is the shared endpoint instead.
            for (j, &v) in centered.iter().enumerate().take(ib + 1).skip(ia + 1) {
                let pos = j as f64;
                if pos <= ia as f64 + fa || pos >= ib as f64 + fb {
                    continue;
                }
                raw_times.push(rec.time(j));
                raw_values.push(v);
            }
            raw_times.push(tb);
            raw_values.push(0.0);
            let mut w = WaveRecord {
                raw_times,
                raw_values,
                period: tb - ta,
                registered: None,
                upcross_fraction: None,
            };
            w.upcross_fraction = w.upcrossing_time().map(|tu| (tu - ta) / (tb - ta));
            w
        })
        .collect();
    Ok(waves)
}

/// Registration machinery shared by all waves of one spec.
///
/// Each wave's samples are mapped to `[0, 1]` and interpolated by a spline of
/// the requested order; that interpolant is then projected by least squares
/// onto the common clamped spline space (`n_knots` equidistant knots) with its
/// value pinned to 0 at both ends, and at 0.5 when the upcrossing is
/// constrained, and evaluated on the `n_grid` common grid.
pub struct Registrar {
    spec: RegistrationSpec,
    grid: Arc<Grid>,
    fit_grid: Grid,
    projector: BSplineProjector,
    n_pins: usize,
}

impl Registrar {
    pub fn new(spec: RegistrationSpec) -> Result<Self> {
        spec.validate()?;
        let grid = Arc::new(Grid::uniform(0.0, 1.0, spec.n_grid)?);
        let basis = BSplineSpec::clamped_uniform(Interval::unit(), spec.spline_order, spec.n_knots)?;
        let fit_points = (8 * basis.n_basis()).max(spec.n_grid).max(201);
        let fit_grid = Grid::uniform(0.0, 1.0, fit_points)?;
        let pins: Vec<f64> = if spec.constrain_upcross {
            vec![0.0, 0.5, 1.0]
        } else {
            vec![0.0, 1.0]
        };
        let projector = BSplineProjector::new(&fit_grid, &basis, &pins, DEFAULT_CONDITION_BOUND)?;
        Ok(Self {
            spec,
            grid,
            fit_grid,
            projector,
            n_pins: pins.len(),
        })
    }

    pub fn spec(&self) -> &RegistrationSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Registered copy of `w`.
    pub fn register(&self, w: &WaveRecord) -> Result<WaveRecord> {
        let t = &w.raw_times;
        let (ta, tb) = (w.t_start(), w.t_end());
        if !(tb > ta) {
            return Err(Error::InvalidParams("wave has zero duration".into()));
        }
        let mut u: Vec<f64> = if self.spec.constrain_upcross {
            let tu = w.upcrossing_time().ok_or(Error::NoUpcrossing)?;
            t.iter()
                .map(|&s| {
                    if s <= tu {
                        0.5 * (s - ta) / (tu - ta)
                    } else {
                        0.5 + 0.5 * (s - tu) / (tb - tu)
                    }
                })
                .collect()
        } else {
            t.iter().map(|&s| (s - ta) / (tb - ta)).collect()
        };
        let last = u.len() - 1;
        u[0] = 0.0;
        u[last] = 1.0;
        let interp = interpolate(&u, &w.raw_values, self.spec.spline_order)?;
        let on_fit: Vec<f64> = self.fit_grid.points().iter().map(|&s| interp.eval(s)).collect();
        let fitted: SplineFunction = self.projector.fit(&on_fit, &vec![0.0; self.n_pins])?;
        let values: Vec<f64> = self.grid.points().iter().map(|&s| fitted.eval(s)).collect();
        let upcross_fraction = if self.spec.constrain_upcross {
            Some(0.5)
        } else {
            w.upcross_fraction
        };
        Ok(WaveRecord {
            registered: Some(Curve::new(self.grid.clone(), values)?),
            upcross_fraction,
            ..w.clone()
        })
    }
}

/// Registers a single wave; build a [`Registrar`] once when registering many.
pub fn register_wave(w: &WaveRecord, spec: RegistrationSpec) -> Result<WaveRecord> {
    Registrar::new(spec)?.register(w)
}

/// Divides every curve by the sample standard deviation of `rec`.
pub fn normalize_sample(waves: &FunctionalSample, rec: &TimeSeriesRecord) -> Result<FunctionalSample> {
    let sd = rec.std_dev();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    waves.map_values(|v| v.iter().map(|x| x / sd).collect())
}

/// Registered waves of one record with their bookkeeping.
#[derive(Debug, Clone)]
pub struct WaveSet {
    pub sample: FunctionalSample,
    pub waves: Vec<WaveRecord>,
    pub dropped: usize,
    pub record_std: f64,
}

/// Summary written next to a wave-set CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSetSidecar {
    pub n_waves: usize,
    pub dropped: usize,
    pub periods: Vec<f64>,
    pub record_std: f64,
    pub hs_interval: f64,
}

impl WaveSet {
    pub fn sidecar(&self) -> WaveSetSidecar {
        WaveSetSidecar {
            n_waves: self.waves.len(),
            dropped: self.dropped,
            periods: self.waves.iter().map(|w| w.period).collect(),
            record_std: self.record_std,
            hs_interval: 4.0 * self.record_std,
        }
    }
}

/// Segments and registers a record. Waves with too few interior samples, or
/// without an upcrossing when one is required, are dropped and counted.
pub fn build_wave_set(rec: &TimeSeriesRecord, spec: RegistrationSpec, label: &str) -> Result<WaveSet> {
    let registrar = Registrar::new(spec)?;
    let mut dropped = 0;
    let mut waves = Vec::new();
    for w in segment_waves(rec)? {
        if w.interior_samples() < MIN_INTERIOR_SAMPLES {
            dropped += 1;
            continue;
        }
        match registrar.register(&w) {
            Ok(r) => waves.push(r),
            Err(Error::NoUpcrossing) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if waves.is_empty() {
        return Err(Error::NoWaves);
    }
    let curves = waves
        .iter()
        .map(|w| w.registered.clone().expect("registered above"))
        .collect();
    Ok(WaveSet {
        sample: FunctionalSample::new(curves, label)?,
        waves,
        dropped,
        record_std: rec.std_dev(),
    })
}
