mod common;

use anneal_core::eval::{
    chi_square_gaussians, energy_distance, energy_permutation_test, gaussian_mgf_bound, gaussian_posterior_closed_form,
    kl_gaussians, laurent_massart_tail, mi_tv_bound, sample_moments, tv_upper_bounds,
};
use anneal_core::linalg::{min_eigenvalue, spd_inverse, Matrix};
use anneal_core::schedule::concentration_radius;
use anneal_core::{build_admissible_schedule, build_coupled_ladder, GaussianSummary, MeasurementModel, Purpose, ScheduleParams, SeedStream};
use common::invert;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

fn normal_pdf(x: f64, m: f64, v: f64) -> f64 {
    (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn ln_normal_pdf(x: f64, m: f64, v: f64) -> f64 {
    -(x - m) * (x - m) / (2.0 * v) - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
}

/// `int p^2 / q - 1` for scalar Gaussians, integrand evaluated in log space.
fn chi_square_quadrature(mp: f64, vp: f64, mq: f64, vq: f64) -> f64 {
    simpson(|x| (2.0 * ln_normal_pdf(x, mp, vp) - ln_normal_pdf(x, mq, vq)).exp(), -40.0, 40.0, 40_000) - 1.0
}

fn tv_1d(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    let lo = (m1 - 12.0 * v1.sqrt()).min(m2 - 12.0 * v2.sqrt());
    let hi = (m1 + 12.0 * v1.sqrt()).max(m2 + 12.0 * v2.sqrt());
    0.5 * simpson(|x| (normal_pdf(x, m1, v1) - normal_pdf(x, m2, v2)).abs(), lo, hi, 20_000)
}

fn std_normals(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

#[test]
fn zero_operator_leaves_prior_unchanged() {
    let prior = GaussianSummary::new(vec![1.0, 2.0], Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
    let model = MeasurementModel::new(Matrix::zeros(1, 2), 0.5).unwrap();
    let post = gaussian_posterior_closed_form(&prior, &model, &[4.0]).unwrap();
    assert!((&post.cov - &prior.cov).norm() < 1e-14);
    assert!(post.mean.iter().zip(&prior.mean).all(|(a, b)| (a - b).abs() < 1e-14));
}

#[test]
fn scalar_conjugacy() {
    let eta: f64 = 0.7;
    let model = MeasurementModel::from_rows(1, 1, &[1.0], eta).unwrap();
    let post = gaussian_posterior_closed_form(&GaussianSummary::isotropic(vec![0.0], 1.0).unwrap(), &model, &[2.0]).unwrap();
    let e2 = eta * eta;
    assert!((post.mean[0] - 2.0 / (1.0 + e2)).abs() < 1e-14);
    assert!((post.cov[(0, 0)] - e2 / (1.0 + e2)).abs() < 1e-14);
}

#[test]
fn closed_form_solves_normal_equations() {
    let mut rng = SeedStream::new(1).rng(Purpose::Oracle, 0);
    let d = 5;
    let b = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let cov = &b * b.transpose() + Matrix::identity(d, d) * 0.5;
    let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a: Vec<f64> = (0..3 * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = MeasurementModel::from_rows(3, d, &a, 0.4).unwrap();
    let y = [0.3, -1.0, 0.8];
    let prior = GaussianSummary::new(mu.clone(), cov.clone()).unwrap();
    let post = gaussian_posterior_closed_form(&prior, &model, &y).unwrap();
    let pp = spd_inverse(&cov).unwrap();
    let am = model.a();
    let prec = &pp + am.transpose() * am / 0.16;
    let lhs = &prec * anneal_core::linalg::Vector::from_column_slice(&post.mean);
    let rhs = &pp * anneal_core::linalg::Vector::from_column_slice(&mu)
        + am.transpose() * anneal_core::linalg::Vector::from_column_slice(&y) / 0.16;
    assert!((lhs - rhs).amax() <= 1e-10);
    // Conditioning only adds precision.
    let post_prec = spd_inverse(&post.cov).unwrap();
    assert!(min_eigenvalue(&(post_prec - pp)) >= -1e-10);
}

#[test]
fn singular_prior_is_rejected() {
    let prior = GaussianSummary::new(vec![0.0, 0.0], Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
    let model = MeasurementModel::from_rows(1, 2, &[1.0, 0.0], 1.0).unwrap();
    assert!(gaussian_posterior_closed_form(&prior, &model, &[0.0]).is_err());
    assert!(GaussianSummary::new(vec![0.0, 0.0], Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
}

#[test]
fn chi_square_against_quadrature() {
    let p = GaussianSummary::isotropic(vec![0.0], 1.0).unwrap();
    let q = GaussianSummary::isotropic(vec![0.0], 2.0).unwrap();
    assert_eq!(chi_square_gaussians(&p, &p).unwrap(), 0.0);
    let quad = chi_square_quadrature(0.0, 1.0, 0.0, 2.0);
    let exact = chi_square_gaussians(&p, &q).unwrap();
    assert!((exact - quad).abs() <= 1e-8, "{exact} vs {quad}");
    let shifted = GaussianSummary::isotropic(vec![0.4], 0.7).unwrap();
    let quad = chi_square_quadrature(0.4, 0.7, 0.0, 1.0);
    let exact = chi_square_gaussians(&shifted, &p).unwrap();
    assert!((exact - quad).abs() <= 1e-8, "{exact} vs {quad}");
}

#[test]
fn chi_square_diverges_past_the_integrability_boundary() {
    let p = GaussianSummary::isotropic(vec![0.0], 3.0).unwrap();
    let q = GaussianSummary::isotropic(vec![0.0], 1.0).unwrap();
    assert_eq!(chi_square_gaussians(&p, &q).unwrap(), f64::INFINITY);
}

#[test]
fn tv_bounds_dominate_exact_scalar_tv() {
    let p = GaussianSummary::isotropic(vec![0.0], 1.0).unwrap();
    assert_eq!(tv_upper_bounds(&p, &p).unwrap(), 0.0);
    let q = GaussianSummary::isotropic(vec![0.1], 1.0).unwrap();
    let bound = tv_upper_bounds(&p, &q).unwrap();
    assert!((bound - 0.05).abs() < 1e-12, "{bound}");
    let phi = Normal::new(0.0, 1.0).unwrap();
    let tv = 2.0 * phi.cdf(0.05) - 1.0;
    assert!(tv <= bound);
    assert!((tv_1d(0.0, 1.0, 0.1, 1.0) - tv).abs() < 1e-9);
    let mut last = 0.0;
    for k in 1..20 {
        let q = GaussianSummary::isotropic(vec![0.05 * k as f64], 1.0).unwrap();
        let b = tv_upper_bounds(&p, &q).unwrap();
        assert!(b > last);
        last = b;
    }
}

#[test]
fn kl_of_scalar_gaussians() {
    let p = GaussianSummary::isotropic(vec![0.3], 0.5).unwrap();
    let q = GaussianSummary::isotropic(vec![-0.2], 2.0).unwrap();
    let exact = 0.5 * (0.5 / 2.0 + 0.25 / 2.0 - 1.0 + (2.0f64 / 0.5).ln());
    assert!((kl_gaussians(&p, &q).unwrap() - exact).abs() < 1e-14);
}

#[test]
fn energy_distance_cases() {
    let mut rng = SeedStream::new(4).rng(Purpose::Oracle, 0);
    let a: Vec<Vec<f64>> = (0..1000).map(|_| std_normals(&mut rng, 1)).collect();
    assert!(energy_distance(&a, &a).unwrap().abs() < 1e-12);
    let far: Vec<Vec<f64>> = (0..1000).map(|_| vec![5.0 + std_normals(&mut rng, 1)[0]]).collect();
    assert!(energy_distance(&a, &far).unwrap() > 4.0);
    let b: Vec<Vec<f64>> = (0..1000).map(|_| std_normals(&mut rng, 1)).collect();
    let test = energy_permutation_test(&a, &b, 199, &mut rng).unwrap();
    assert!(test.p_value >= 0.01, "{test:?}");
    assert!(energy_distance(&a, &[]).is_err());
}

#[test]
fn laurent_massart_tails() {
    assert_eq!(laurent_massart_tail(7, 0.0), (7.0, 7.0));
    let (hi, lo) = laurent_massart_tail(10, 20f64.ln());
    let mut rng = SeedStream::new(5).rng(Purpose::Oracle, 0);
    let n = 100_000;
    let (mut above, mut below) = (0, 0);
    for _ in 0..n {
        let s: f64 = std_normals(&mut rng, 10).iter().map(|v| v * v).sum();
        above += (s >= hi) as usize;
        below += (s <= lo) as usize;
    }
    assert!(above as f64 / n as f64 <= 0.05 && below as f64 / n as f64 <= 0.05, "{above} {below}");
}

#[test]
fn gaussian_mgf_bound_cases() {
    assert!((gaussian_mgf_bound(1e-12, 0.0, 1e-12, 3).unwrap() - 1.0).abs() < 1e-9);
    let b = gaussian_mgf_bound(0.1, 0.0, 0.1, 2).unwrap();
    assert!((b - 5.0 / 3.0).abs() < 1e-12);
    let mut rng = SeedStream::new(6).rng(Purpose::Oracle, 0);
    let n = 100_000;
    let mc = (0..n).map(|_| (0.1 * std_normals(&mut rng, 2).iter().map(|v| v * v).sum::<f64>()).exp()).sum::<f64>()
        / n as f64;
    assert!(mc <= b && (mc - 1.25).abs() < 0.02, "{mc}");
    assert!(gaussian_mgf_bound(0.3, 0.0, 0.3, 2).is_err());
    assert!(gaussian_mgf_bound(0.1, 0.0, 0.0, 2).is_err());
}

#[test]
fn mutual_information_tv_bound() {
    let model = MeasurementModel::from_rows(1, 1, &[1.0], 1.0).unwrap();
    assert_eq!(mi_tv_bound(&model, 0.0, 10.0), 0.0);
    let bound = mi_tv_bound(&model, 1.0, 10.0);
    assert!((bound - 0.05).abs() < 1e-15);
    let doubled = MeasurementModel::from_rows(1, 1, &[2.0], 1.0).unwrap();
    assert!((mi_tv_bound(&doubled, 1.0, 10.0) - 2.0 * bound).abs() < 1e-15);
    // E_y TV(N(y/101, 100/101), N(0, 1)) with y ~ N(0, 101), by Simpson in y.
    let avg = simpson(
        |y| normal_pdf(y, 0.0, 101.0) * tv_1d(y / 101.0, 100.0 / 101.0, 0.0, 1.0),
        -8.0 * 101f64.sqrt(),
        8.0 * 101f64.sqrt(),
        400,
    );
    assert!(avg <= bound, "{avg}");
}

#[test]
fn sample_moments_of_known_set() {
    let s = vec![vec![1.0, 0.0], vec![-1.0, 2.0], vec![0.0, 1.0]];
    let (m, c) = sample_moments(&s).unwrap();
    assert_eq!(m, vec![0.0, 1.0]);
    assert!((c[(0, 0)] - 2.0 / 3.0).abs() < 1e-15 && (c[(0, 1)] + 2.0 / 3.0).abs() < 1e-15);
    assert!(sample_moments(&[]).is_err());
}

#[test]
fn rung_chi_square_stays_below_recorded_envelope() {
    // Recorded constant for exp(C' (m gamma_i + ln lambda)) at the 1 - 1/lambda quantile.
    const C_PRIME: f64 = 1.0;
    let eta = 0.3;
    let model = MeasurementModel::from_rows(1, 1, &[1.0], eta).unwrap();
    let p = ScheduleParams::new(1.0, 1, 1, concentration_radius(1, 1.0, 0.01)).with_c(1.0);
    let ladder = build_admissible_schedule(&model, &p).unwrap();
    let etas = ladder.etas();
    let post = |y: f64, e: f64| GaussianSummary::isotropic(vec![y / (1.0 + e * e)], e * e / (1.0 + e * e)).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..etas.len() - 1 {
        let mut chis: Vec<f64> = (0..1000)
            .map(|r| {
                let mut rng = SeedStream::new(r).rng(Purpose::Oracle, i as u64);
                let x: f64 = StandardNormal.sample(&mut rng);
                let n: f64 = StandardNormal.sample(&mut rng);
                let y = x + eta * n;
                let obs = build_coupled_ladder(&[y], &ladder, &mut rng).unwrap();
                chi_square_gaussians(&post(obs.get(i)[0], etas[i]), &post(obs.get(i + 1)[0], etas[i + 1])).unwrap()
            })
            .collect();
        chis.sort_by(f64::total_cmp);
        let q = chis[((1.0 - 1.0 / p.lambda) * 1000.0) as usize - 1];
        let g = ladder.gammas()[i];
        worst = worst.max((1.0 + q).ln() / (g + p.lambda.ln()));
    }
    assert!(worst <= C_PRIME, "measured C' = {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_precision_dominates_prior(
        a in prop::collection::vec(-2.0f64..2.0, 6),
        eta in 0.1f64..3.0,
        v in 0.2f64..5.0,
        y in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let model = MeasurementModel::from_rows(2, 3, &a, eta).unwrap();
        let prior = GaussianSummary::isotropic(vec![0.0; 3], v).unwrap();
        let post = gaussian_posterior_closed_form(&prior, &model, &y).unwrap();
        let gap = spd_inverse(&post.cov).unwrap() - Matrix::identity(3, 3) / v;
        prop_assert!(min_eigenvalue(&gap) >= -1e-10);
        // Independent dense solve agrees.
        let rows: Vec<Vec<f64>> = a.chunks(3).map(|r| r.to_vec()).collect();
        let (m, c) = common::conjugate_posterior(&rows, eta, v, &y);
        for i in 0..3 {
            prop_assert!((m[i] - post.mean[i]).abs() <= 1e-9 * (1.0 + m[i].abs()));
            for j in 0..3 {
                prop_assert!((c[i][j] - post.cov[(i, j)]).abs() <= 1e-9);
            }
        }
        let _ = invert(&c);
    }

    #[test]
    fn tv_bound_never_below_exact_scalar_tv(m in -2.0f64..2.0, v in 0.6f64..1.8) {
        let p = GaussianSummary::isotropic(vec![0.0], 1.0).unwrap();
        let q = GaussianSummary::isotropic(vec![m], v).unwrap();
        prop_assert!(tv_1d(0.0, 1.0, m, v) <= tv_upper_bounds(&p, &q).unwrap() + 1e-9);
    }
}
