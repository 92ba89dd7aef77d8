#![allow(dead_code)]

//! Shared helpers for the integration tests: random functional datasets and
//! a from-scratch statistic that shares no code with the library.

use std::f64::consts::PI;
use std::sync::Arc;

use fda2s::functional::{make_sample, FunctionalSample, Grid, JointSample};
use fda2s::projections::{BasisSpec, PoolWeights, TrigParts};
use fda2s::qn::{qn_statistic, score_matrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Smooth random curve: a few random harmonics plus small white noise.
pub fn random_curve(r: &mut ChaCha8Rng, t: &[f64], shift: f64) -> Vec<f64> {
    let c: Vec<f64> = (0..6).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    t.iter()
        .map(|&s| {
            let mut v = shift + c[0] + c[1] * s;
            for l in 1..=4 {
                v += c[l + 1] / l as f64 * (PI * l as f64 * s).sin();
            }
            v + 0.05 * r.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

pub struct Dataset {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn random(r: &mut ChaCha8Rng, m: usize, n: usize, n_grid: usize) -> Self {
        let t = uniform_grid(n_grid);
        let x = (0..m).map(|_| random_curve(r, &t, 0.0)).collect();
        let y = (0..n).map(|_| random_curve(r, &t, 0.2)).collect();
        Self { t, x, y }
    }

    pub fn grid(&self) -> Arc<Grid> {
        Arc::new(Grid::new(self.t.clone()).unwrap())
    }

    pub fn samples(&self) -> (FunctionalSample, FunctionalSample) {
        let g = self.grid();
        (
            make_sample(g.clone(), &self.x, "x").unwrap(),
            make_sample(g, &self.y, "y").unwrap(),
        )
    }

    pub fn pooled(&self) -> Vec<Vec<f64>> {
        self.x.iter().chain(&self.y).cloned().collect()
    }
}

/// Trapezoid integral of `f` sampled at `t`.
pub fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..t.len() - 1 {
        s += 0.5 * (f[i] + f[i + 1]) * (t[i + 1] - t[i]);
    }
    s
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `Q_n` straight from the definition: trapezoid scores, explicit group
/// means and covariances, dense solve.
pub fn oracle_qn(t: &[f64], x: &[Vec<f64>], y: &[Vec<f64>], g: &[Vec<f64>]) -> f64 {
    let k = g.len();
    let score = |c: &Vec<f64>| -> Vec<f64> {
        g.iter()
            .map(|gj| trapezoid(t, &c.iter().zip(gj).map(|(a, b)| a * b).collect::<Vec<_>>()))
            .collect()
    };
    let sx: Vec<Vec<f64>> = x.iter().map(score).collect();
    let sy: Vec<Vec<f64>> = y.iter().map(score).collect();
    let (m, n) = (x.len() as f64, y.len() as f64);
    let mean = |s: &Vec<Vec<f64>>| -> Vec<f64> {
        (0..k).map(|j| s.iter().map(|r| r[j]).sum::<f64>() / s.len() as f64).collect()
    };
    let cov = |s: &Vec<Vec<f64>>, mu: &Vec<f64>| -> Vec<Vec<f64>> {
        let d = s.len() as f64 - 1.0;
        (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| s.iter().map(|r| (r[a] - mu[a]) * (r[b] - mu[b])).sum::<f64>() / d)
                    .collect()
            })
            .collect()
    };
    let (mx, my) = (mean(&sx), mean(&sy));
    let (cx, cy) = (cov(&sx, &mx), cov(&sy, &my));
    let total = m + n;
    let eta: Vec<f64> = (0..k).map(|j| total.sqrt() * (mx[j] - my[j])).collect();
    let alpha2 = total / m;
    let beta2 = total / n;
    let c: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| (alpha2 + beta2) / (total - 2.0) * ((m - 1.0) * cx[a][b] + (n - 1.0) * cy[a][b]))
                .collect()
        })
        .collect();
    let z = gauss_solve(c, eta.clone());
    eta.iter().zip(&z).map(|(a, b)| a * b).sum()
}

/// Indicator functions of `k` equal parts of `[0, 1]`; a point on an interior
/// boundary is split half-and-half between the neighbours.
pub fn oracle_indicators(t: &[f64], k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let (lo, hi) = (j as f64 / k as f64, (j + 1) as f64 / k as f64);
            t.iter()
                .map(|&s| {
                    let on = |b: f64| (s - b).abs() < 1e-12;
                    if (j > 0 && on(lo)) || (j + 1 < k && on(hi)) {
                        0.5
                    } else if s > lo && s < hi || (j == 0 && on(lo)) || (j + 1 == k && on(hi)) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Recursive Cox–de Boor evaluation with right-closed last span.
pub fn cox_de_boor(knots: &[f64], i: usize, order: usize, s: f64) -> f64 {
    let last = knots[knots.len() - 1];
    if order == 1 {
        let inside = knots[i] <= s && s < knots[i + 1];
        let at_end = s == last && knots[i] < knots[i + 1] && knots[i + 1] == last;
        return if inside || at_end { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + order - 1] - knots[i];
    if d1 > 0.0 {
        v += (s - knots[i]) / d1 * cox_de_boor(knots, i, order - 1, s);
    }
    let d2 = knots[i + order] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + order] - s) / d2 * cox_de_boor(knots, i + 1, order - 1, s);
    }
    v
}

pub fn oracle_bsplines(t: &[f64], order: usize, interior: usize) -> Vec<Vec<f64>> {
    let mut knots = vec![0.0; order];
    knots.extend((1..=interior).map(|j| j as f64 / (interior + 1) as f64));
    knots.extend(vec![1.0; order]);
    (0..order + interior)
        .map(|i| t.iter().map(|&s| cox_de_boor(&knots, i, order, s)).collect())
        .collect()
}

/// Mean-absolute-Fourier-coefficient sine (and cosine) combinations.
pub fn oracle_trig(t: &[f64], pooled: &[Vec<f64>], k_max: usize, both: bool) -> Vec<Vec<f64>> {
    let coef = |f: fn(f64) -> f64, l: usize| -> f64 {
        pooled
            .iter()
            .map(|c| {
                let prod: Vec<f64> = c
                    .iter()
                    .zip(t)
                    .map(|(v, &s)| v * f(2.0 * PI * l as f64 * s))
                    .collect();
                trapezoid(t, &prod).abs()
            })
            .sum::<f64>()
            / pooled.len() as f64
    };
    let build = |f: fn(f64) -> f64| -> Vec<f64> {
        let w: Vec<f64> = (1..=k_max).map(|l| coef(f, l)).collect();
        t.iter()
            .map(|&s| (1..=k_max).map(|l| w[l - 1] * f(2.0 * PI * l as f64 * s)).sum())
            .collect()
    };
    let mut out = vec![build(f64::sin)];
    if both {
        out.push(build(f64::cos));
    }
    out
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix: `(values, vectors)`
/// with eigenvector `j` in column `j`.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let tt = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let tt = if theta == 0.0 { 1.0 } else { tt };
                let c = 1.0 / (tt * tt + 1.0).sqrt();
                let s = tt * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Leading `d` eigenfunctions of the covariance operator of the rows in
/// `groups`, each group centered at its own mean and weighted by `w[g]`.
pub fn oracle_pca(t: &[f64], groups: &[(&[Vec<f64>], f64)], d: usize) -> Vec<Vec<f64>> {
    let p = t.len();
    let mut quad = vec![0.0; p];
    for i in 0..p - 1 {
        let h = t[i + 1] - t[i];
        quad[i] += 0.5 * h;
        quad[i + 1] += 0.5 * h;
    }
    let mut k = vec![vec![0.0; p]; p];
    for (rows, weight) in groups {
        let mu: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect();
        for r in rows.iter() {
            for a in 0..p {
                for b in 0..p {
                    k[a][b] += weight * (r[a] - mu[a]) * (r[b] - mu[b]);
                }
            }
        }
    }
    let m: Vec<Vec<f64>> = (0..p)
        .map(|a| (0..p).map(|b| quad[a].sqrt() * k[a][b] * quad[b].sqrt()).collect())
        .collect();
    let (vals, vecs) = jacobi_eigen(m);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    idx[..d]
        .iter()
        .map(|&c| (0..p).map(|a| vecs[a][c] / quad[a].sqrt()).collect())
        .collect()
}

pub fn library_qn(d: &Dataset, spec: &BasisSpec) -> f64 {
    let (x, y) = d.samples();
    let joint = JointSample::new(&x, &y).unwrap();
    let g = spec.build(&joint).unwrap();
    let sx = score_matrix(&x, &g).unwrap();
    let sy = score_matrix(&y, &g).unwrap();
    qn_statistic(&sx, &sy).unwrap().qn
}

pub fn oracle_for(d: &Dataset, spec: &BasisSpec) -> f64 {
    let g = match *spec {
        BasisSpec::Indicator { k } => oracle_indicators(&d.t, k),
        BasisSpec::Bspline { order, interior } => oracle_bsplines(&d.t, order, interior),
        BasisSpec::Trig { k_max, parts } => {
            oracle_trig(&d.t, &d.pooled(), k_max, parts == TrigParts::Both)
        }
        BasisSpec::Pca { d: dim, weights } => {
            let (m, n) = (d.x.len() as f64, d.y.len() as f64);
            match weights {
                PoolWeights::Joint => oracle_pca(&d.t, &[(&d.pooled(), 1.0 / (m + n - 1.0))], dim),
                PoolWeights::Equal => oracle_pca(&d.t, &[(&d.x, 0.5 / (m - 1.0)), (&d.y, 0.5 / (n - 1.0))], dim),
                PoolWeights::Proportion => {
                    let theta = m / (m + n);
                    oracle_pca(&d.t, &[(&d.x, (1.0 - theta) / (m - 1.0)), (&d.y, theta / (n - 1.0))], dim)
                }
            }
        }
        BasisSpec::Custom { .. } => unreachable!(),
    };
    oracle_qn(&d.t, &d.x, &d.y, &g)
}
