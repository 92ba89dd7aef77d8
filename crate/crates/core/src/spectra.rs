//! Sea-surface spectra: a bimodal parametric family, Gaussian record
//! synthesis, Parzen lag-window estimation, and spectral characteristics.
//!
//! Densities are one-sided in angular frequency (rad/s) with
//! `∫₀^{ω_max} s(ω) dω = σ²`, so `Hs = 4σ` needs no factor of two.
//! An angular frequency `ω` in rad/s corresponds to `ω / fs` rad/sample.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::functional::{Curve, Grid};
use crate::rng::substream;

const GRAVITY: f64 = 9.81;

/// Number of frequencies used by [`estimate_spectrum`].
pub const DEFAULT_SPECTRUM_POINTS: usize = 257;

/// Energy above the Nyquist frequency tolerated by [`simulate_gaussian`].
pub const NYQUIST_ENERGY_TOLERANCE: f64 = 0.01;

/// One-sided spectral density on an angular-frequency grid starting at 0.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    freq: Arc<Grid>,
    values: Vec<f64>,
}

impl SpectralDensity {
    pub fn new(freq: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if freq.interval().a.abs() > 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "frequency grid must start at 0, starts at {}",
                freq.interval().a
            )));
        }
        if values.len() != freq.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} density values for {} frequencies",
                values.len(),
                freq.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFiniteValue(format!(
                "density value {i} = {} (must be finite and non-negative)",
                values[i]
            )));
        }
        Ok(Self { freq, values })
    }

    pub fn freq(&self) -> &Arc<Grid> {
        &self.freq
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `σ² = ∫ s(ω) dω` by the trapezoid rule.
    pub fn variance(&self) -> f64 {
        self.freq.integrate(&self.values)
    }

    /// Angular frequency of the largest density value.
    pub fn peak_frequency(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        self.freq.points()[i]
    }

    /// Peak period `2π / ω_peak`.
    pub fn peak_period(&self) -> f64 {
        2.0 * PI / self.peak_frequency()
    }

    pub fn to_curve(&self) -> Curve {
        Curve::new(self.freq.clone(), self.values.clone()).expect("density values are finite")
    }

    pub fn from_curve(curve: &Curve) -> Result<Self> {
        Self::new(curve.grid().clone(), curve.values().iter().map(|v| v.max(0.0)).collect())
    }

    /// Pointwise scaling by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.freq.clone(), self.values.iter().map(|v| v * c).collect())
    }

    /// Linear interpolation of the density, zero beyond the grid.
    fn at(&self, w: f64) -> f64 {
        let p = self.freq.points();
        if w < 0.0 || w > p[p.len() - 1] {
            return 0.0;
        }
        let j = p.partition_point(|&x| x <= w);
        if j == 0 {
            return self.values[0];
        }
        if j >= p.len() {
            return self.values[p.len() - 1];
        }
        let (x0, x1) = (p[j - 1], p[j]);
        let (y0, y1) = (self.values[j - 1], self.values[j]);
        y0 + (y1 - y0) * (w - x0) / (x1 - x0)
    }

    /// Trapezoid integral of the density over `[0, w]`.
    fn integral_below(&self, w: f64) -> f64 {
        let p = self.freq.points();
        let mut total = 0.0;
        for i in 0..p.len() - 1 {
            if p[i] >= w {
                break;
            }
            let hi = p[i + 1].min(w);
            let v_hi = if hi < p[i + 1] { self.at(hi) } else { self.values[i + 1] };
            total += 0.5 * (self.values[i] + v_hi) * (hi - p[i]);
        }
        total
    }
}

/// Pointwise mean of densities sharing one frequency grid.
pub fn average_spectrum(spectra: &[SpectralDensity]) -> Result<SpectralDensity> {
    let first = spectra.first().ok_or(Error::EmptySample)?;
    if spectra
        .iter()
        .any(|s| !crate::functional::same_grid(&first.freq, &s.freq))
    {
        return Err(Error::GridMismatch);
    }
    // Running mean, so equal inputs give exactly that value.
    let mut values = first.values.clone();
    for (j, s) in spectra.iter().enumerate().skip(1) {
        let w = 1.0 / (j + 1) as f64;
        values
            .iter_mut()
            .zip(&s.values)
            .for_each(|(m, v)| *m += (v - *m) * w);
    }
    SpectralDensity::new(first.freq.clone(), values)
}

/// `Hs = 4 √(∫ s dω)`.
pub fn significant_wave_height(s: &SpectralDensity) -> f64 {
    4.0 * s.variance().max(0.0).sqrt()
}

/// Significant wave height (m) and spectral peak period (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsethaugenParams {
    pub hs: f64,
    pub tp: f64,
}

impl TorsethaugenParams {
    pub fn new(hs: f64, tp: f64) -> Result<Self> {
        if !(hs.is_finite() && hs > 0.0) {
            return Err(Error::InvalidParams(format!("hs must be positive, got {hs}")));
        }
        if !(tp.is_finite() && tp > 0.0) {
            return Err(Error::InvalidParams(format!("tp must be positive, got {tp}")));
        }
        Ok(Self { hs, tp })
    }

    pub fn peak_frequency(&self) -> f64 {
        2.0 * PI / self.tp
    }
}

/// One generalized JONSWAP component with unit-free shape
/// `F(x) = x⁻⁴ exp(−x⁻⁴) γ^{r(x)}`, `x = ω/ω_c`, scaled to carry `variance`
/// over `(0, ∞)`.
struct Component {
    variance: f64,
    wc: f64,
    gamma: f64,
    /// `∫₀^∞ F(x) dx`.
    unit_area: f64,
}

impl Component {
    fn new(variance: f64, tp: f64, gamma: f64) -> Self {
        let mut c = Self {
            variance,
            wc: 2.0 * PI / tp,
            gamma,
            unit_area: 1.0,
        };
        // Trapezoid on [0, X] plus the x⁻⁴ tail beyond X.
        let x_max = 40.0;
        let steps = 80_000;
        let h = x_max / steps as f64;
        let inner: f64 = (1..steps).map(|i| c.unit_shape(i as f64 * h)).sum();
        c.unit_area = h * (inner + 0.5 * c.unit_shape(x_max)) + x_max.powi(-3) / 3.0;
        c
    }

    fn unit_shape(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let sigma = if x <= 1.0 { 0.07 } else { 0.09 };
        let r = (-(x - 1.0).powi(2) / (2.0 * sigma * sigma)).exp();
        let y = x.powi(-4);
        y * (-y).exp() * self.gamma.powf(r)
    }

    fn density(&self, w: f64) -> f64 {
        self.variance / (self.wc * self.unit_area) * self.unit_shape(w / self.wc)
    }

    fn slope(&self, w: f64) -> f64 {
        let h = 1e-6 * self.wc;
        (self.density(w + h) - self.density(w - h)) / (2.0 * h)
    }
}

fn peak_enhancement(hs: f64, tp: f64) -> f64 {
    let steepness = 2.0 * PI * hs / (GRAVITY * tp * tp);
    (35.0 * steepness.powf(0.857)).clamp(1.0, 7.0)
}

/// `(variance, tp, γ)` of one spectral component.
type ComponentParams = (f64, f64, f64);

/// Primary and optional secondary component of the wind-sea/swell split.
fn split(p: &TorsethaugenParams) -> (ComponentParams, Option<ComponentParams>) {
    let sigma2 = (p.hs / 4.0).powi(2);
    // Peak period of a fully developed sea for this Hs, and a steepness limit.
    let tf = 6.6 * p.hs.cbrt();
    let tl = (2.0 * p.hs.sqrt()).min(0.9 * tf);
    if p.tp <= tf {
        // Wind-sea dominated; swell appears as the sea gets younger.
        let eps = ((tf - p.tp) / (tf - tl)).clamp(0.0, 1.0);
        let share = 0.25 * eps;
        let hs1 = ((1.0 - share) * sigma2).sqrt() * 4.0;
        let primary = ((1.0 - share) * sigma2, p.tp, peak_enhancement(hs1, p.tp));
        let secondary = (share > 0.0).then_some((share * sigma2, tf + 2.0, 1.0));
        (primary, secondary)
    } else {
        // Swell dominated; a small wind sea rides on top.
        let eps = ((p.tp - tf) / (25.0 - tf).max(1.0)).clamp(0.0, 1.0);
        let share = 0.25 * eps;
        let gamma = (peak_enhancement(p.hs, tf) * (1.0 + 6.0 * eps)).clamp(1.0, 7.0);
        let primary = ((1.0 - share) * sigma2, p.tp, gamma);
        let hs2 = (share * sigma2).sqrt() * 4.0;
        let secondary = (share > 0.0).then_some((share * sigma2, (6.6 * hs2.cbrt()).min(0.8 * p.tp), 1.0));
        (primary, secondary)
    }
}

/// Components whose sum has zero slope at `2π/tp`: the primary component is
/// moved slightly to cancel the secondary component's slope there.
fn components(p: &TorsethaugenParams) -> Vec<Component> {
    let ((v1, t1, g1), secondary) = split(p);
    let Some((v2, t2, g2)) = secondary else {
        return vec![Component::new(v1, t1, g1)];
    };
    let second = Component::new(v2, t2, g2);
    let mut first = Component::new(v1, t1, g1);
    let wp = p.peak_frequency();
    let target = -second.slope(wp);
    let slope_at = |wc: f64, c: &mut Component| {
        c.wc = wc;
        c.slope(wp) - target
    };
    let (mut lo, mut hi) = (0.7 * wp, 1.4 * wp);
    // Slope at wp grows as the component moves up in frequency.
    if slope_at(lo, &mut first) > 0.0 || slope_at(hi, &mut first) < 0.0 {
        log::warn!("cannot align spectral peak with tp = {}", p.tp);
        first.wc = wp;
        return vec![first, second];
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if slope_at(mid, &mut first) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    first.wc = 0.5 * (lo + hi);
    vec![first, second]
}

/// Bimodal wind-sea plus swell spectrum with its main peak at `2π/tp`,
/// rescaled so that `4√(∫s) = hs` exactly on `freq`.
///
/// `freq` must start at 0 and reach at least `2.5 · 2π/tp`.
pub fn torsethaugen_spectrum(params: TorsethaugenParams, freq: &Arc<Grid>) -> Result<SpectralDensity> {
    let p = TorsethaugenParams::new(params.hs, params.tp)?;
    let iv = freq.interval();
    if iv.a.abs() > 1e-12 {
        return Err(Error::InvalidGrid("frequency grid must start at 0".into()));
    }
    if iv.b < 2.5 * p.peak_frequency() {
        return Err(Error::InvalidGrid(format!(
            "frequency grid ends at {} rad/s, need at least {:.4}",
            iv.b,
            2.5 * p.peak_frequency()
        )));
    }
    let comps = components(&p);
    let mut total: Vec<f64> = freq
        .points()
        .iter()
        .map(|&w| comps.iter().map(|c| c.density(w)).sum())
        .collect();
    if !(freq.integrate(&total) > 0.0) {
        return Err(Error::InvalidGrid("frequency grid does not resolve the spectrum".into()));
    }
    let sigma2 = (p.hs / 4.0).powi(2);
    let scale = sigma2 / freq.integrate(&total);
    total.iter_mut().for_each(|v| *v *= scale);
    SpectralDensity::new(freq.clone(), total)
}

/// A regularly sampled surface-elevation record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    pub fs: f64,
    pub values: Vec<f64>,
    pub t0: f64,
}

impl TimeSeriesRecord {
    pub fn new(fs: f64, values: Vec<f64>, t0: f64) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidParams(format!("sampling frequency must be positive, got {fs}")));
        }
        if !t0.is_finite() {
            return Err(Error::NonFiniteValue("t0".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("record sample {i}")));
        }
        Ok(Self { fs, values, t0 })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.fs
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Variance about the mean with divisor N.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.values.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Angular Nyquist frequency `π·fs` in rad/s.
    pub fn nyquist(&self) -> f64 {
        PI * self.fs
    }
}

/// Uniform angular-frequency grid on `[0, π·fs]`.
pub fn nyquist_grid(fs: f64, n_points: usize) -> Result<Arc<Grid>> {
    Ok(Arc::new(Grid::uniform(0.0, PI * fs, n_points)?))
}

/// Gaussian record with spectral density `s`, from the substream keyed by `seed`.
pub fn simulate_gaussian(s: &SpectralDensity, duration: f64, fs: f64, seed: u64) -> Result<TimeSeriesRecord> {
    simulate_with_rng(s, duration, fs, &mut substream(seed, &[]))
}

/// Random-amplitude spectral synthesis
/// `X(t_j) = Σ_k A_k cos(ω_k t_j) + B_k sin(ω_k t_j)`, with independent
/// centered Gaussian `A_k, B_k` of variance `s(ω_k) Δω_k`.
///
/// The synthesis frequencies are the FFT frequencies `ω_k = 2πk/(M·dt)`,
/// `k = 0..=M/2`, for a length `M` of at least twice the record, so the sum is
/// one inverse FFT. Trapezoid end weights make `Σ s(ω_k)Δω_k` the trapezoid
/// integral of the interpolated density.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    s: &SpectralDensity,
    duration: f64,
    fs: f64,
    rng: &mut R,
) -> Result<TimeSeriesRecord> {
    if !(fs.is_finite() && fs > 0.0 && duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidParams(format!("duration {duration} s at {fs} Hz")));
    }
    let n = (duration * fs).round() as usize;
    if n < 2 {
        return Err(Error::RecordTooShort { len: n, need: 1 });
    }
    let nyquist = PI * fs;
    let w_max = s.freq.interval().b;
    if w_max < nyquist * (1.0 - 1e-9) {
        return Err(Error::InvalidGrid(format!(
            "density grid ends at {w_max} rad/s, below the Nyquist frequency {nyquist}"
        )));
    }
    let total = s.variance();
    if total > 0.0 {
        let above = (total - s.integral_below(nyquist)).max(0.0);
        if above > NYQUIST_ENERGY_TOLERANCE * total {
            return Err(Error::NyquistViolation {
                fraction: above / total,
                nyquist,
            });
        }
    }
    let m = (2 * n).next_power_of_two();
    let dt = 1.0 / fs;
    let dw = 2.0 * PI / (m as f64 * dt);
    let half = m / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (k, slot) in buf.iter_mut().enumerate().take(half + 1) {
        let weight = if k == 0 || k == half { 0.5 } else { 1.0 };
        let sd = (s.at(k as f64 * dw) * dw * weight).sqrt();
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        *slot = Complex64::new(sd * a, -sd * b);
    }
    FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);
    let values = buf[..n].iter().map(|c| c.re).collect();
    TimeSeriesRecord::new(fs, values, 0.0)
}

/// Parzen lag window: `1 − 6u² + 6u³` on `[0, 1/2]`, `2(1 − u)³` on `(1/2, 1]`.
pub fn parzen_window(u: f64) -> f64 {
    let u = u.abs();
    if u <= 0.5 {
        1.0 - 6.0 * u * u + 6.0 * u * u * u
    } else if u <= 1.0 {
        2.0 * (1.0 - u).powi(3)
    } else {
        0.0
    }
}

/// Biased sample autocovariances `ĉ(h) = (1/N) Σ x_t x_{t+h}` of the
/// mean-removed series, `h = 0..=max_lag`.
pub fn autocovariance(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = values.iter().map(|v| v - mean).collect();
    (0..=max_lag.min(n - 1))
        .map(|h| x[..n - h].iter().zip(&x[h..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

/// Parzen lag-window estimate on [`DEFAULT_SPECTRUM_POINTS`] frequencies over `[0, π·fs]`.
pub fn estimate_spectrum(rec: &TimeSeriesRecord, parzen_l: usize) -> Result<SpectralDensity> {
    let freq = nyquist_grid(rec.fs, DEFAULT_SPECTRUM_POINTS)?;
    estimate_spectrum_on(rec, parzen_l, &freq)
}

/// Parzen lag-window estimate on a given grid over `[0, π·fs]`:
///
/// `s(ω) = (dt/π) [ĉ(0) + 2 Σ_{h=1}^{L} w(h/L) ĉ(h) cos(ω h dt)]`,
///
/// clipped at zero and rescaled so its trapezoid integral equals the sample
/// variance `ĉ(0)`.
pub fn estimate_spectrum_on(rec: &TimeSeriesRecord, parzen_l: usize, freq: &Arc<Grid>) -> Result<SpectralDensity> {
    ParzenEstimator::new(rec.fs, parzen_l, freq)?.estimate(rec)
}

/// Parzen lag-window estimator for one sampling rate, window length and
/// frequency grid, with its weighted cosine table precomputed.
pub struct ParzenEstimator {
    fs: f64,
    parzen_l: usize,
    freq: Arc<Grid>,
    /// Row `j`: `2 w(h/L) cos(ω_j h dt)` for `h = 1..=L`.
    kernel: Vec<Vec<f64>>,
}

impl ParzenEstimator {
    pub fn new(fs: f64, parzen_l: usize, freq: &Arc<Grid>) -> Result<Self> {
        if parzen_l == 0 {
            return Err(Error::InvalidParams("Parzen window length must be positive".into()));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidParams(format!("sampling frequency must be positive, got {fs}")));
        }
        let iv = freq.interval();
        let nyquist = PI * fs;
        if iv.a.abs() > 1e-12 || (iv.b - nyquist).abs() > 1e-9 * nyquist {
            return Err(Error::InvalidGrid(format!(
                "estimation grid must span [0, {nyquist}], got [{}, {}]",
                iv.a, iv.b
            )));
        }
        let dt = 1.0 / fs;
        let kernel = freq
            .points()
            .iter()
            .map(|&w| {
                (1..=parzen_l)
                    .map(|h| 2.0 * parzen_window(h as f64 / parzen_l as f64) * (w * h as f64 * dt).cos())
                    .collect()
            })
            .collect();
        Ok(Self {
            fs,
            parzen_l,
            freq: freq.clone(),
            kernel,
        })
    }

    pub fn freq(&self) -> &Arc<Grid> {
        &self.freq
    }

    pub fn estimate(&self, rec: &TimeSeriesRecord) -> Result<SpectralDensity> {
        if rec.fs != self.fs {
            return Err(Error::InvalidParams(format!(
                "record sampled at {} Hz, estimator set up for {} Hz",
                rec.fs, self.fs
            )));
        }
        if rec.len() <= 2 * self.parzen_l {
            return Err(Error::RecordTooShort {
                len: rec.len(),
                need: 2 * self.parzen_l,
            });
        }
        let c = autocovariance(&rec.values, self.parzen_l);
        let dt = rec.dt();
        let scale = c[0] * dt / PI;
        let mut values: Vec<f64> = self
            .kernel
            .iter()
            .map(|row| {
                let sum: f64 = row.iter().zip(&c[1..]).map(|(k, ch)| k * ch).sum();
                let v = dt / PI * (c[0] + sum);
                debug_assert!(v >= -1e-9 * scale.max(f64::MIN_POSITIVE), "negative estimate {v}");
                v.max(0.0)
            })
            .collect();
        let integral = self.freq.integrate(&values);
        if integral > 0.0 {
            let k = c[0] / integral;
            values.iter_mut().for_each(|v| *v *= k);
        }
        SpectralDensity::new(self.freq.clone(), values)
    }
}
