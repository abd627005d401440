mod common;

use anneal_core::linalg::Matrix;
use anneal_core::measurement::MeasurementModel;
use anneal_core::scores::{
    conditional_gaussian_score, conditioned_smoothed_score, posterior_score, prior_score, ring_hessian_eigs,
    shell_perturbed_oracle, smoothed_score, ShellPerturbation,
};
use anneal_core::{PriorSpec, ScoreOracle};
use common::{gradient, hessian, rel_err, ring_log_density};
use proptest::prelude::*;

fn mixture() -> PriorSpec {
    PriorSpec::mixture(vec![0.3, 0.7], vec![vec![1.0, -0.5], vec![-1.5, 2.0]], 0.4).unwrap()
}

fn general() -> PriorSpec {
    let cov = Matrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
    PriorSpec::gaussian(vec![0.5, -1.0], cov).unwrap()
}

#[test]
fn standard_normal_score() {
    assert_eq!(prior_score(&PriorSpec::standard(2), &[3.0, -1.0]).unwrap(), vec![-3.0, 1.0]);
}

#[test]
fn ring_score_vanishes_on_ridge_which_tends_to_unit_circle() {
    for &w in &[0.2, 0.1, 0.03, 0.01] {
        let ring = PriorSpec::ring(w).unwrap();
        let radial = |r: f64| ring.score(&[r, 0.0], 0.0).unwrap()[0];
        // The radial score is positive inside the ridge and negative outside it.
        let (mut lo, mut hi) = (0.5, 1.0);
        assert!(radial(lo) > 0.0 && radial(hi) < 0.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if radial(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let ridge = 0.5 * (lo + hi);
        assert!((1.0 - ridge) <= w * w, "w = {w}, ridge = {ridge}");
        // On the unit circle itself the score stays O(1) while the curvature is O(1/w^2).
        assert!(radial(1.0).abs() <= 0.5 + w * w, "{}", radial(1.0));
    }
}

#[test]
fn ring_score_at_origin_is_zero() {
    assert_eq!(prior_score(&PriorSpec::ring(0.1).unwrap(), &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn symmetric_mixture_score_vanishes_at_origin() {
    let p = PriorSpec::mixture(vec![0.5, 0.5], vec![vec![2.0, -1.0], vec![-2.0, 1.0]], 0.7).unwrap();
    let s = prior_score(&p, &[0.0, 0.0]).unwrap();
    assert!(s.iter().all(|v| v.abs() < 1e-14), "{s:?}");
}

#[test]
fn ring_score_matches_quadrature_gradient() {
    let ring = PriorSpec::ring(0.1).unwrap();
    let x = [0.5, 0.0];
    let s = prior_score(&ring, &x).unwrap();
    let fd = gradient(&|z| ring_log_density(0.1, [z[0], z[1]], 4096), &x, 1e-4);
    assert!((s[0] - fd[0]).abs() <= 1e-5 * s[0].abs(), "{s:?} vs {fd:?}");
    assert!(s[1].abs() < 1e-12 && fd[1].abs() < 1e-6);
}

#[test]
fn gaussian_smoothing_adds_variance() {
    let s = smoothed_score(&PriorSpec::standard(1), 1.0, &[2.0]).unwrap();
    assert!((s[0] + 1.0).abs() < 1e-15);
}

#[test]
fn zero_smoothing_is_prior_score() {
    let p = mixture();
    let mut rng = anneal_core::SeedStream::new(3).rng(anneal_core::Purpose::Oracle, 0);
    for _ in 0..100 {
        let x = p.sample(&mut rng);
        assert_eq!(smoothed_score(&p, 0.0, &x).unwrap(), prior_score(&p, &x).unwrap());
    }
}

#[test]
fn ring_smoothing_adds_in_quadrature() {
    let x = [0.5, 0.0];
    let smoothed = smoothed_score(&PriorSpec::ring(0.1).unwrap(), 0.03, &x).unwrap();
    let wider = prior_score(&PriorSpec::ring(0.04f64.sqrt()).unwrap(), &x).unwrap();
    assert!(rel_err(&smoothed, &wider) < 1e-14);
    let fd = gradient(&|z| ring_log_density(0.2, [z[0], z[1]], 4096), &x, 1e-4);
    assert!(rel_err(&smoothed, &fd) < 1e-6, "{smoothed:?} vs {fd:?}");
}

#[test]
fn posterior_score_with_zero_operator_is_prior_score() {
    let p = general();
    let model = MeasurementModel::new(Matrix::zeros(1, 2), 0.3).unwrap();
    let x = [0.2, 0.9];
    assert_eq!(posterior_score(&p, &model, &[1.7], &x).unwrap(), prior_score(&p, &x).unwrap());
}

#[test]
fn scalar_posterior_score_vanishes_at_conjugate_mean() {
    let eta: f64 = 0.4;
    let y = 1.3;
    let model = MeasurementModel::from_rows(1, 1, &[1.0], eta).unwrap();
    let x = y / (1.0 + eta * eta);
    let s = posterior_score(&PriorSpec::standard(1), &model, &[y], &[x]).unwrap();
    assert!(s[0].abs() < 1e-14);
}

#[test]
fn posterior_score_matches_finite_differences() {
    let a = [0.3, -1.2, 0.7, 1.1, 0.4, -0.6];
    let model = MeasurementModel::from_rows(2, 3, &a, 0.6).unwrap();
    let y = [0.4, -0.9];
    let x = [0.3, 0.1, -0.8];
    let p = PriorSpec::standard(3);
    let f = |z: &[f64]| {
        let r0 = a[0] * z[0] + a[1] * z[1] + a[2] * z[2] - y[0];
        let r1 = a[3] * z[0] + a[4] * z[1] + a[5] * z[2] - y[1];
        -0.5 * z.iter().map(|v| v * v).sum::<f64>() - (r0 * r0 + r1 * r1) / (2.0 * 0.36)
    };
    let fd = gradient(&f, &x, 1e-3);
    let s = posterior_score(&p, &model, &y, &x).unwrap();
    assert!(rel_err(&s, &fd) < 1e-6, "{s:?} vs {fd:?}");
}

#[test]
fn conditional_score_vanishes_at_conditional_mean() {
    let y = [1.0, -2.0, 0.5];
    let c = 0.7 / (0.3 + 0.7);
    let z: Vec<f64> = y.iter().map(|v| c * v).collect();
    let s = conditional_gaussian_score(&y, &z, 0.3, 0.7).unwrap();
    assert!(s.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn conditional_score_unit_instance_is_gradient_of_conditional_density() {
    // grad_Y log N(Z; Y/2, 1/2) at Y = 2, Z = 0 is (Z - Y/2) / (1/2) * 1/2 = -1.
    let s = conditional_gaussian_score(&[2.0], &[0.0], 1.0, 1.0).unwrap();
    assert!((s[0] + 1.0).abs() < 1e-15, "{s:?}");
}

#[test]
fn conditional_score_matches_finite_differences() {
    let (s1, s2) = (0.4, 1.3);
    let c = s2 / (s1 + s2);
    let v = s1 * s2 / (s1 + s2);
    let z = [0.3, -1.1, 2.0, 0.7];
    let y = [1.2, 0.4, -0.5, 0.9];
    let f = |yy: &[f64]| -z.iter().zip(yy).map(|(zi, yi)| (zi - c * yi).powi(2)).sum::<f64>() / (2.0 * v);
    let fd = gradient(&f, &y, 1e-3);
    let s = conditional_gaussian_score(&y, &z, s1, s2).unwrap();
    assert!(rel_err(&s, &fd) < 1e-6, "{s:?} vs {fd:?}");
}

#[test]
fn unsmoothed_conditioning_is_a_gaussian_measurement() {
    let p = general();
    let x0 = [0.8, -0.2];
    let sigma: f64 = 0.7;
    let x = [0.1, 0.4];
    let model = MeasurementModel::new(Matrix::identity(2, 2), sigma).unwrap();
    let a = conditioned_smoothed_score(&p, &x0, sigma * sigma, 0.0, &x).unwrap();
    let b = posterior_score(&p, &model, &x0, &x).unwrap();
    assert!(rel_err(&a, &b) < 1e-14);
}

#[test]
fn conditioned_smoothed_gaussian_closed_form() {
    // p = N(0, I), sigma^2 = 1: p_{x0} = N(x0 / 2, I / 2); smoothing by t^2 = 1 gives N(x0 / 2, 3/2 I).
    let p = PriorSpec::standard(3);
    let x0 = [1.0, -2.0, 0.4];
    let x = [0.3, 0.6, -1.0];
    let f = |z: &[f64]| -z.iter().zip(&x0).map(|(a, b)| (a - b / 2.0).powi(2)).sum::<f64>() / 3.0;
    let fd = gradient(&f, &x, 1e-3);
    let s = conditioned_smoothed_score(&p, &x0, 1.0, 1.0, &x).unwrap();
    assert!(rel_err(&s, &fd) < 1e-6, "{s:?} vs {fd:?}");
    let mode: Vec<f64> = x0.iter().map(|v| v / 2.0).collect();
    let at_mode = conditioned_smoothed_score(&p, &x0, 1.0, 1.0, &mode).unwrap();
    assert!(at_mode.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn conditioned_smoothed_ring_matches_quadrature() {
    // Score of (p_ring * N(x0; ., s^2)) * N(0, t^2), by quadrature over the circle
    // and a 2D Gauss-Hermite-free brute grid over the smoothing variable.
    let (w, s2, t2) = (0.3_f64, 0.2_f64, 0.05_f64);
    let x0 = [0.9, 0.3];
    let x = [0.7, 0.1];
    let log_conv = |z: &[f64]| {
        // p_{x0} * N(0, t^2) at z = int p(u) N(x0; u, s2) N(z; u, t2) du; with p a
        // smoothed ring the integral over u is Gaussian, leaving a circle integral.
        let n = 4096;
        let (a, b) = (1.0 / (w * w), 1.0 / s2 + 1.0 / t2);
        let prec = a + b;
        let mut acc = Vec::with_capacity(n);
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
            let c = [th.cos(), th.sin()];
            let lin: Vec<f64> = (0..2).map(|i| a * c[i] + x0[i] / s2 + z[i] / t2).collect();
            let quad: f64 = (0..2).map(|i| a * c[i] * c[i] + x0[i] * x0[i] / s2 + z[i] * z[i] / t2).sum();
            acc.push(0.5 * (lin[0] * lin[0] + lin[1] * lin[1]) / prec - 0.5 * quad);
        }
        let top = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + acc.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
    };
    let fd = gradient(&log_conv, &x, 1e-4);
    let s = conditioned_smoothed_score(&PriorSpec::ring(w).unwrap(), &x0, s2, t2, &x).unwrap();
    assert!(rel_err(&s, &fd) < 1e-6, "{s:?} vs {fd:?}");
}

#[test]
fn ring_hessian_limit_at_centre() {
    let (_, t) = ring_hessian_eigs(0.1, 1e-4);
    assert!((t - 4900.0).abs() <= 0.01 * 4900.0, "{t}");
    let (r0, t0) = ring_hessian_eigs(0.1, 0.0);
    assert!((r0 - 4900.0).abs() < 1e-9 && (t0 - 4900.0).abs() < 1e-9, "{r0} {t0}");
}

#[test]
fn ring_hessian_matches_quadrature_at_half_radius() {
    let (radial, tangential) = ring_hessian_eigs(0.1, 0.5);
    let h = hessian(&|z| ring_log_density(0.1, [z[0], z[1]], 4096), &[0.5, 0.0], 1e-3);
    assert!((radial - h[0][0]).abs() <= 1e-4 * h[0][0].abs(), "{radial} vs {}", h[0][0]);
    assert!((tangential - h[1][1]).abs() <= 1e-4 * h[1][1].abs(), "{tangential} vs {}", h[1][1]);
    assert!(h[0][1].abs() < 1e-4);
}

#[test]
fn shell_indicator_off_far_outside() {
    let spec = ShellPerturbation::along_first_axis(10, 0.3, 4.0, 0.1, 6.0 / 11.0).unwrap();
    let oracle = shell_perturbed_oracle(PriorSpec::standard(10), spec).unwrap();
    let x = vec![2.0; 10];
    assert_eq!(oracle.score(&x, 0.0).unwrap(), PriorSpec::standard(10).score(&x, 0.0).unwrap());
}

#[test]
fn shell_centre_gets_full_magnitude_and_smoothed_queries_pass_through() {
    let d = 10;
    let sigma_sq = 6.0 / 11.0;
    let spec = ShellPerturbation::along_first_axis(d, 0.3, 4.0, 0.1, sigma_sq).unwrap();
    let oracle = shell_perturbed_oracle(PriorSpec::standard(d), spec).unwrap();
    let x = vec![sigma_sq.sqrt(); d];
    let base = PriorSpec::standard(d).score(&x, 0.0).unwrap();
    let diff: Vec<f64> = oracle.score(&x, 0.0).unwrap().iter().zip(&base).map(|(a, b)| a - b).collect();
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - oracle.magnitude()).abs() <= 1e-12 * norm);
    assert_eq!(oracle.score(&x, 0.5).unwrap(), PriorSpec::standard(d).score(&x, 0.5).unwrap());
}

#[test]
fn shell_parameters_are_validated() {
    assert!(ShellPerturbation::along_first_axis(5, 0.6, 4.0, 0.1, 0.5).is_err());
    assert!(ShellPerturbation::along_first_axis(5, 0.3, 1.0, 0.1, 0.5).is_err());
    assert!(ShellPerturbation::along_first_axis(5, 0.3, 4.0, 1.5, 0.5).is_err());
    assert!(ShellPerturbation::new(0.3, 4.0, 0.1, vec![1.0, 1.0], 0.5).is_err());
}

#[test]
fn unsupported_inputs_are_rejected() {
    assert!(PriorSpec::mixture(vec![0.5, 0.6], vec![vec![0.0], vec![1.0]], 1.0).is_err());
    assert!(PriorSpec::ring(0.0).is_err());
    assert!(PriorSpec::gaussian(vec![0.0, 0.0], Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    assert!(PriorSpec::standard(2).score(&[0.0, 0.0], -1.0).is_err());
}

fn prior_strategy() -> impl Strategy<Value = PriorSpec> {
    prop_oneof![
        (-2.0f64..2.0, 0.3f64..3.0).prop_map(|(m, v)| PriorSpec::isotropic(vec![m, -m, 0.5], v).unwrap()),
        Just(general()),
        Just(mixture()),
        (0.3f64..1.0).prop_map(|w| PriorSpec::ring(w).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn score_is_gradient_of_log_density(
        prior in prior_strategy(),
        coords in prop::collection::vec(-2.0f64..2.0, 3),
        sigma_sq in 0.0f64..2.0,
    ) {
        let x = &coords[..prior.dim()];
        let f = |z: &[f64]| prior.log_density(z, sigma_sq).unwrap();
        let fd = gradient(&f, x, 1e-5);
        let s = prior.score(x, sigma_sq).unwrap();
        let err = rel_err(&s, &fd);
        let scale = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-5 || err * scale <= 1e-7, "{:?} vs {:?}", s, fd);
    }

    #[test]
    fn posterior_hessian_is_strongly_concave(
        alpha in 0.2f64..5.0,
        a in prop::collection::vec(-2.0f64..2.0, 6),
        eta in 0.2f64..2.0,
        x in prop::collection::vec(-3.0f64..3.0, 3),
        y in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let prior = PriorSpec::isotropic(vec![0.0; 3], 1.0 / alpha).unwrap();
        let model = MeasurementModel::from_rows(2, 3, &a, eta).unwrap();
        let f = |z: &[f64]| {
            let r = model.forward(z).unwrap();
            prior.log_density(z, 0.0).unwrap()
                - r.iter().zip(&y).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / (2.0 * eta * eta)
        };
        let h = hessian(&f, &x, 1e-3);
        let m = Matrix::from_fn(3, 3, |i, j| 0.5 * (h[i][j] + h[j][i]));
        let top = m.symmetric_eigenvalues().max();
        prop_assert!(top <= -alpha + 1e-6, "top eigenvalue {} vs -alpha {}", top, -alpha);
    }

    #[test]
    fn ring_eigenvalues_bounded_below(w in 0.05f64..1.0, r in 0.0f64..3.0) {
        let (radial, tangential) = ring_hessian_eigs(w, r);
        let floor = -1.0 / (w * w) - 1e-6;
        prop_assert!(radial >= floor && tangential >= floor, "w = {}, r = {}: {} {}", w, r, radial, tangential);
    }

    #[test]
    fn shell_budget_identity(d in 2usize..200, rho in 0.05f64..0.45, k in 1.5f64..8.0, eps in 0.01f64..0.9) {
        let spec = ShellPerturbation::along_first_axis(d, rho, k, eps, 6.0 / 11.0).unwrap();
        let mass = spec.shell_mass();
        prop_assume!(mass > 1e-200);
        let lhs = spec.magnitude().powf(k) * mass;
        prop_assert!((lhs - eps.powf(k)).abs() <= 1e-12 * eps.powf(k));
    }
}
