mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::*;
use fda2s::bspline::{to_bspline, BSplineSpec};
use fda2s::chisq::{chi_square_quantile, chi_square_sf};
use fda2s::functional::{make_sample, Grid, Interval};
use fda2s::projections::BasisSpec;
use fda2s::resampling::{quantile_table, DEFAULT_PROBS};
use fda2s::spectra::{estimate_spectrum, simulate_gaussian, torsethaugen_spectrum, nyquist_grid, TimeSeriesRecord, TorsethaugenParams};
use fda2s::waves::{downcrossings, register_wave, segment_waves, RegistrationSpec};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn qn_matches_brute_force_for_all_schemes() {
    let specs: Vec<BasisSpec> = [
        "indicator:k=1",
        "indicator:k=2",
        "indicator:k=3",
        "bspline:order=2,interior=0",
        "bspline:order=3,interior=0",
        "bspline:order=2,interior=1",
        "trig:k=3,parts=odd",
        "trig:k=3,parts=both",
        "pca:d=1,weights=joint",
        "pca:d=2,weights=equal",
        "pca:d=3,weights=proportion",
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect();
    let mut r = rng(11);
    for case in 0..20 {
        let m = r.random_range(3..=8);
        let n = r.random_range(3..=8);
        let d = Dataset::random(&mut r, m, n, 31);
        for spec in &specs {
            let lib = library_qn(&d, spec);
            let ora = oracle_for(&d, spec);
            assert!(
                (lib - ora).abs() <= 1e-10 * ora.abs().max(1e-12),
                "case {case} {spec}: library {lib} oracle {ora}"
            );
        }
    }
}

#[test]
fn trapezoid_rule_converges_at_second_order() {
    let integral = |n: usize| {
        let g = Grid::uniform(0.0, PI, n).unwrap();
        let v: Vec<f64> = g.points().iter().map(|t| t.sin()).collect();
        g.integrate(&v)
    };
    let (coarse, fine) = (integral(101), integral(201));
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    assert!((extrapolated - 2.0).abs() < 1e-8);
    let ratio = (coarse - 2.0) / (fine - 2.0);
    assert!((ratio - 4.0).abs() < 1e-3, "error ratio {ratio}");
}

#[test]
fn least_squares_projection_matches_normal_equations() {
    let mut r = rng(5);
    let t = uniform_grid(41);
    let grid = Arc::new(Grid::new(t.clone()).unwrap());
    let rows: Vec<Vec<f64>> = (0..3).map(|_| random_curve(&mut r, &t, 0.0)).collect();
    let sample = make_sample(grid, &rows, "s").unwrap();
    let (order, interior) = (4, 5);
    let spec = BSplineSpec::clamped_interior(Interval::unit(), order, interior).unwrap();
    let projected = to_bspline(&sample, &spec).unwrap();
    let basis = oracle_bsplines(&t, order, interior);
    let nb = basis.len();
    for (row, got) in rows.iter().zip(projected.curves()) {
        let gram: Vec<Vec<f64>> = (0..nb)
            .map(|a| (0..nb).map(|b| (0..t.len()).map(|i| basis[a][i] * basis[b][i]).sum()).collect())
            .collect();
        let rhs: Vec<f64> = (0..nb).map(|a| (0..t.len()).map(|i| basis[a][i] * row[i]).sum()).collect();
        let c = gauss_solve(gram, rhs);
        for i in 0..t.len() {
            let want: f64 = (0..nb).map(|a| c[a] * basis[a][i]).sum();
            assert!((got.values()[i] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn chi_square_matches_reference_library() {
    for k in [1usize, 2, 3, 8, 12, 30] {
        let dist = ChiSquared::new(k as f64).unwrap();
        for q in [0.01, 0.5, 1.0, 4.605, 10.0, 21.026, 50.0] {
            let want = 1.0 - dist.cdf(q);
            let got = chi_square_sf(q, k).unwrap();
            assert!((got - want).abs() < 1e-12 + 1e-9 * want, "k={k} q={q}: {got} vs {want}");
        }
        for p in [0.01, 0.5, 0.9, 0.95, 0.975, 0.99] {
            let want = dist.inverse_cdf(p);
            let got = chi_square_quantile(p, k).unwrap();
            assert!((got - want).abs() < 1e-8 * want.max(1.0), "k={k} p={p}: {got} vs {want}");
        }
    }
}

#[test]
fn quantile_table_on_inverse_cdf_chi_square_sample() {
    let mut r = rng(2);
    // χ²₂ is exponential with mean 2.
    let values: Vec<f64> = (0..100_000).map(|_| -2.0 * (1.0 - r.random::<f64>()).ln()).collect();
    let table = quantile_table(&values, 2, &DEFAULT_PROBS).unwrap();
    for (p, e) in table.probs.iter().zip(&table.relative_error) {
        assert!(e.abs() < 0.02, "p={p}: relative error {e}");
    }
    assert!(table.empirical.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn hand_placed_crossings_are_interpolated_exactly() {
    // Downward crossings between samples 1-2 (at 1 + 0.75) and 5-6 (at 5 + 0.2).
    let v = vec![-1.0, 3.0, -1.0, -2.0, 0.5, 4.0, -16.0, 2.0];
    let rec = TimeSeriesRecord::new(2.0, v, 10.0).unwrap();
    let c = downcrossings(&rec, 0.0);
    let want = [10.0 + 1.75 / 2.0, 10.0 + 5.2 / 2.0];
    assert_eq!(c.len(), 2);
    for (g, w) in c.iter().zip(want) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn constrained_registration_places_upcross_at_half() {
    // Negative lobe over the first 40% of a 5 s wave, positive lobe after;
    // equal lobe areas keep the record mean at zero.
    let period = 5.0;
    let split = 0.4 * period;
    let f = |s: f64| {
        let s = s.rem_euclid(period);
        if s < split {
            -1.5 * (PI * s / split).sin()
        } else {
            (PI * (s - split) / (period - split)).sin()
        }
    };
    let fs = 20.0;
    let values: Vec<f64> = (0..(3.0 * period * fs) as usize)
        .map(|i| f(i as f64 / fs + 0.013))
        .collect();
    let rec = TimeSeriesRecord::new(fs, values, 0.0).unwrap();
    let waves = segment_waves(&rec).unwrap();
    let w = &waves[0];
    assert!((w.upcross_fraction.unwrap() - 0.4).abs() < 0.01);
    let spec = RegistrationSpec {
        constrain_upcross: true,
        ..Default::default()
    };
    let r = register_wave(w, spec).unwrap();
    let curve = r.registered.unwrap();
    let v = curve.values();
    assert!(v[50].abs() < 1e-6, "value at 0.5: {}", v[50]);
    assert!(v[49] < 0.0 && v[51] > 0.0);
    // The lobes meet with a slope kink at the downcrossings, which biases the
    // linearly interpolated crossing times by about 0.01 s.
    for (&u, &val) in curve.grid().points().iter().zip(v) {
        let lobe = if u < 0.5 { 1.5 } else { 1.0 };
        assert!((val + lobe * (2.0 * PI * u).sin()).abs() < 5e-2, "u={u}: {val}");
    }
}

#[test]
fn white_noise_estimate_is_flat() {
    let mut r = rng(8);
    let values: Vec<f64> = (0..10_000).map(|_| r.sample(StandardNormal)).collect();
    let rec = TimeSeriesRecord::new(1.28, values, 0.0).unwrap();
    let est = estimate_spectrum(&rec, 60).unwrap();
    let v = est.values();
    let (lo, hi) = (v.len() / 10, v.len() - v.len() / 10);
    let central = &v[lo..hi];
    let max = central.iter().cloned().fold(f64::MIN, f64::max);
    let min = central.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min <= 3.0, "max/min = {}", max / min);
}

#[test]
fn long_record_variance_and_seed_independence() {
    let grid = nyquist_grid(1.28, 257).unwrap();
    let s = torsethaugen_spectrum(TorsethaugenParams { hs: 2.0, tp: 4.0 }, &grid).unwrap();
    let a = simulate_gaussian(&s, 7200.0, 1.28, 21).unwrap();
    let b = simulate_gaussian(&s, 7200.0, 1.28, 22).unwrap();
    assert!((a.variance() / 0.25 - 1.0).abs() < 0.10, "variance {}", a.variance());
    let n = a.len() as f64;
    let (ma, mb) = (a.mean(), b.mean());
    let cov: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
    let corr = cov / (a.std_dev() * b.std_dev());
    assert!(corr.abs() < 3.0 / n.sqrt(), "correlation {corr}");
}
