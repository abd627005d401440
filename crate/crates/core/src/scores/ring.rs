//! The ring prior: uniform on the unit circle blurred by `N(0, w^2 I_2)`.
//!
//! With `z = |x| / w^2` its log density is
//! `-ln(2 pi w^2) - (|x|^2 + 1) / (2 w^2) + ln I0(z)` and the radial profile
//! `f(r) = -r^2 / (2 w^2) + ln I0(r / w^2)` carries all curvature.

use std::f64::consts::PI;

use rand::Rng;

use crate::rng::standard_normal;
use crate::special::{bessel_ratio, bessel_ratio_derivative, log_bessel_i0};

pub(crate) fn log_density(w_sq: f64, x: &[f64]) -> f64 {
    let r = x[0].hypot(x[1]);
    -(2.0 * PI * w_sq).ln() - (r * r + 1.0) / (2.0 * w_sq) + log_bessel_i0(r / w_sq)
}

pub(crate) fn score_into(w_sq: f64, x: &[f64], out: &mut [f64]) {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        out[0] = 0.0;
        out[1] = 0.0;
        return;
    }
    let shrink = 1.0 - bessel_ratio(r / w_sq) / r;
    out[0] = -x[0] * shrink / w_sq;
    out[1] = -x[1] * shrink / w_sq;
}

/// Eigenvalues `(radial, tangential)` of the Hessian of `log p` at radius `r`.
///
/// Radial: `f''(r) = -1/w^2 + R'(z) / w^4` with `R = I1/I0`,
/// `R'(z) = 1 - R/z - R^2`. Tangential: `f'(r) / r = (-1 + R(z) / r) / w^2`.
/// At `r = 0` both equal `-1/w^2 + 1/(2 w^4)`.
pub fn ring_hessian_eigs(w: f64, r: f64) -> (f64, f64) {
    assert!(w > 0.0 && r >= 0.0, "ring Hessian needs w > 0 and r >= 0");
    let w2 = w * w;
    if r == 0.0 {
        let v = -1.0 / w2 + 0.5 / (w2 * w2);
        return (v, v);
    }
    let z = r / w2;
    let radial = -1.0 / w2 + bessel_ratio_derivative(z) / (w2 * w2);
    let tangential = (-1.0 + bessel_ratio(z) / r) / w2;
    (radial, tangential)
}

/// Best-Fisher rejection sampler for the von Mises law on the circle.
pub fn sample_von_mises<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return 2.0 * PI * rng.random::<f64>() - PI;
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let s = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + s * z) / (s + z);
        let c = kappa * (s - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return mu + if u3 > 0.5 { theta } else { -theta };
        }
    }
}

/// Exact draw from `p(x) N(x0; x, sigma_sq I)` for the ring of width `w`:
/// the circle point has a von Mises angle, then `x` is Gaussian given it.
pub(crate) fn sample_conditioned<R: Rng + ?Sized>(w: f64, x0: &[f64], sigma_sq: f64, rng: &mut R) -> Vec<f64> {
    let w2 = w * w;
    let kappa = x0[0].hypot(x0[1]) / (w2 + sigma_sq);
    let angle = sample_von_mises(x0[1].atan2(x0[0]), kappa, rng);
    let u = [angle.cos(), angle.sin()];
    let prec = 1.0 / w2 + 1.0 / sigma_sq;
    let sd = (1.0 / prec).sqrt();
    (0..2)
        .map(|i| (u[i] / w2 + x0[i] / sigma_sq) / prec + sd * standard_normal(rng))
        .collect()
}
