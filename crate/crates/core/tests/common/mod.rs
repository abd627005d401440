//! Oracles shared by the integration tests. They are written independently of
//! the library internals so a bug there cannot hide itself here.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `log int N(x; (cos t, sin t), w^2 I) dt / 2pi` by the periodic trapezoid rule,
/// including the normalising constant.
pub fn ring_log_density(w: f64, x: [f64; 2], points: usize) -> f64 {
    let w2 = w * w;
    let logs: Vec<f64> = (0..points)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.5) / points as f64;
            let (a, b) = (x[0] - t.cos(), x[1] - t.sin());
            -(a * a + b * b) / (2.0 * w2)
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    top + (sum / points as f64).ln() - (2.0 * PI * w2).ln()
}

/// Five-point central gradient.
pub fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let at = |s: f64| {
                let mut y = x.to_vec();
                y[i] += s;
                f(&y)
            };
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        })
        .collect()
}

/// Central-difference Hessian.
pub fn hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let at = |si: f64, sj: f64| {
                let mut y = x.to_vec();
                y[i] += si;
                y[j] += sj;
                f(&y)
            };
            out[i][j] = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        }
    }
    out
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Standard error of the unbiased sample variance, from the fourth central moment.
pub fn var_stderr(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = mean(v);
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2) / n).sqrt()
}

pub fn column(samples: &[Vec<f64>], j: usize) -> Vec<f64> {
    samples.iter().map(|s| s[j]).collect()
}

/// Dense conjugate Gaussian posterior for prior `N(0, v I)`, written as a
/// direct solve so tests do not lean on the library's own implementation.
pub fn conjugate_posterior(a: &[Vec<f64>], eta: f64, prior_var: f64, y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a[0].len();
    let mut prec = vec![vec![0.0; d]; d];
    for i in 0..d {
        prec[i][i] = 1.0 / prior_var;
        for j in 0..d {
            for row in a {
                prec[i][j] += row[i] * row[j] / (eta * eta);
            }
        }
    }
    let cov = invert(&prec);
    let rhs: Vec<f64> = (0..d).map(|i| a.iter().zip(y).map(|(row, yk)| row[i] * yk).sum::<f64>() / (eta * eta)).collect();
    let mean = (0..d).map(|i| (0..d).map(|j| cov[i][j] * rhs[j]).sum()).collect();
    (mean, cov)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let piv = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                a[r].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}
