//! Exponentially scaled modified Bessel functions and a few distribution helpers.
//!
//! `i{n}e(z) = exp(-z) I_n(z)` for `z >= 0`. The power series is used below
//! [`SERIES_LIMIT`] (all terms positive, no cancellation, no overflow), the
//! Hankel asymptotic expansion above it, where its smallest term is below
//! `exp(-2 * SERIES_LIMIT)`.

use statrs::function::gamma::gamma_lr;

const SERIES_LIMIT: f64 = 40.0;

fn series(nu: u32, z: f64) -> f64 {
    let half = 0.5 * z;
    let q = half * half;
    // leading term (z/2)^nu / nu!
    let mut term = (1..=nu).fold(1.0, |acc, k| acc * half / k as f64);
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + nu as f64));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum * (-z).exp()
}

/// Terms of the asymptotic sum `sum_k (-1)^k a_k(nu) / z^k`, truncated at the
/// smallest term.
fn asymptotic_terms(nu: u32, z: f64) -> Vec<f64> {
    let mu = 4.0 * (nu as f64) * (nu as f64);
    let mut terms = vec![1.0];
    let mut term = 1.0_f64;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        terms.push(next);
        term = next;
        if term.abs() < 1e-18 {
            break;
        }
    }
    terms
}

fn asymptotic(nu: u32, z: f64) -> f64 {
    asymptotic_terms(nu, z).iter().sum::<f64>() / (2.0 * std::f64::consts::PI * z).sqrt()
}

fn scaled(nu: u32, z: f64) -> f64 {
    assert!(z >= 0.0, "modified Bessel argument must be non-negative");
    if z < SERIES_LIMIT {
        series(nu, z)
    } else {
        asymptotic(nu, z)
    }
}

pub fn bessel_i0e(z: f64) -> f64 {
    scaled(0, z)
}

pub fn bessel_i1e(z: f64) -> f64 {
    scaled(1, z)
}

pub fn bessel_i2e(z: f64) -> f64 {
    scaled(2, z)
}

/// `ln I_0(z)`, finite for all `z >= 0`.
pub fn log_bessel_i0(z: f64) -> f64 {
    bessel_i0e(z).ln() + z
}

/// `I_1(z) / I_0(z)`, increasing from 0 to 1.
pub fn bessel_ratio(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    bessel_i1e(z) / bessel_i0e(z)
}

/// `1 - I_1(z)/I_0(z)` without cancellation at large `z`.
pub fn bessel_ratio_complement(z: f64) -> f64 {
    if z < SERIES_LIMIT {
        return 1.0 - bessel_ratio(z);
    }
    let t0 = asymptotic_terms(0, z);
    let t1 = asymptotic_terms(1, z);
    let n = t0.len().min(t1.len());
    // The leading terms are both 1 and cancel exactly.
    let diff: f64 = (1..n).map(|k| t0[k] - t1[k]).sum();
    let i0: f64 = t0.iter().sum();
    diff / i0
}

/// Derivative of `I_1/I_0`: `1 - R/z - R^2` with `R = I_1/I_0`. Tends to 1/2 at 0.
pub fn bessel_ratio_derivative(z: f64) -> f64 {
    if z == 0.0 {
        return 0.5;
    }
    if z < SERIES_LIMIT {
        let r = bessel_ratio(z);
        return 1.0 - r / z - r * r;
    }
    let q = bessel_ratio_complement(z);
    q * (2.0 - q) - (1.0 - q) / z
}

/// `(I_0 I_2 - I_1^2) / I_0^2`, non-positive by the Turán inequality.
pub fn bessel_turan(z: f64) -> f64 {
    let i0 = bessel_i0e(z);
    let r1 = bessel_i1e(z) / i0;
    let r2 = bessel_i2e(z) / i0;
    r2 - r1 * r1
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_cdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(0.5 * dof as f64, 0.5 * x)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
