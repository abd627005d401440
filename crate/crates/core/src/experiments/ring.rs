//! Ring prior: Hessian eigenvalues against finite differences of a quadrature
//! density, and posterior sampling given an extra Gaussian measurement.

use std::f64::consts::PI;

use rand::Rng;
use serde_json::json;

use super::{cell, Config, ExperimentOutput, Table};
use crate::error::{Error, Result};
use crate::eval::energy_permutation_test;
use crate::langevin::StepPolicy;
use crate::measurement::{simulate_measurement, MeasurementModel};
use crate::rng::{standard_normal, Purpose, SeedStream};
use crate::samplers::{gaussian_sampler, RunArtifact, RunConfig};
use crate::schedule::ScheduleParams;
use crate::scores::{ring_hessian_eigs, PriorSpec};
use crate::special::{bessel_turan, log_sum_exp};

#[derive(Clone, Debug, PartialEq)]
pub struct RingHessianParams {
    pub w: f64,
    pub radii: Vec<f64>,
    pub quad_points: usize,
    pub fd_step: f64,
}

impl Default for RingHessianParams {
    fn default() -> Self {
        Self {
            w: 0.1,
            radii: vec![
                0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.8, 2.0, 2.5,
            ],
            quad_points: 4096,
            fd_step: 1e-3,
        }
    }
}

impl RingHessianParams {
    pub fn from_config(c: &mut Config) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            w: c.f64("w", d.w)?,
            radii: c.opt_list("radii")?.unwrap_or(d.radii),
            quad_points: c.usize("quad_points", d.quad_points)?,
            fd_step: c.f64("fd_step", d.fd_step)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingHessianRow {
    pub r: f64,
    pub radial: f64,
    pub tangential: f64,
    pub fd_radial: f64,
    pub fd_tangential: f64,
    /// `-1/w^2 + (I0 I2 - I1^2) / (w^4 I0^2)`, reported for comparison.
    pub turan_radial: f64,
}

/// Log density of the ring up to a constant, by the trapezoid rule over the circle.
pub fn ring_log_density_quadrature(w: f64, points: usize, x: [f64; 2]) -> f64 {
    let w2 = w * w;
    let terms: Vec<f64> = (0..points)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / points as f64;
            let (dx, dy) = (x[0] - t.cos(), x[1] - t.sin());
            -(dx * dx + dy * dy) / (2.0 * w2)
        })
        .collect();
    log_sum_exp(&terms)
}

/// Second derivatives along `e1` and `e2` at `(r, 0)` by the five-point stencil.
pub fn ring_fd_hessian(w: f64, points: usize, r: f64, h: f64) -> (f64, f64) {
    let f = |x: f64, y: f64| ring_log_density_quadrature(w, points, [x, y]);
    let centre = f(r, 0.0);
    let stencil = |g: &dyn Fn(f64) -> f64| {
        (-g(2.0 * h) + 16.0 * g(h) - 30.0 * centre + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h)
    };
    (stencil(&|s| f(r + s, 0.0)), stencil(&|s| f(r, s)))
}

pub fn ring_hessian_grid(p: &RingHessianParams) -> Result<Vec<RingHessianRow>> {
    if !(p.w > 0.0) || p.quad_points < 16 || !(p.fd_step > 0.0) {
        return Err(Error::invalid("ring grid needs w > 0, quad_points >= 16, fd_step > 0"));
    }
    let w2 = p.w * p.w;
    p.radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::invalid(format!("radii must be positive, got {r}")));
            }
            let (radial, tangential) = ring_hessian_eigs(p.w, r);
            let (fd_radial, fd_tangential) = ring_fd_hessian(p.w, p.quad_points, r, p.fd_step);
            Ok(RingHessianRow {
                r,
                radial,
                tangential,
                fd_radial,
                fd_tangential,
                turan_radial: -1.0 / w2 + bessel_turan(r / w2) / (w2 * w2),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingPosteriorParams {
    pub w: f64,
    pub sigma: f64,
    pub eta: f64,
    pub chains: usize,
    pub h: f64,
    pub c: f64,
    pub lambda: f64,
    pub eps: f64,
    /// Strong log-concavity of the conditioned prior near the anchor.
    pub alpha: f64,
    pub radius: f64,
    /// Angle of the true signal on the unit circle.
    pub truth_angle: f64,
    pub oracle_permutations: usize,
}

impl Default for RingPosteriorParams {
    fn default() -> Self {
        Self {
            w: 0.1,
            sigma: 0.05,
            eta: 0.1,
            chains: 1000,
            h: 1e-4,
            c: 1.0,
            lambda: 10.0,
            eps: 0.1,
            alpha: 350.0,
            radius: 0.4,
            truth_angle: 0.0,
            oracle_permutations: 499,
        }
    }
}

impl RingPosteriorParams {
    pub fn from_config(c: &mut Config) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            w: c.f64("w", d.w)?,
            sigma: c.f64("sigma", d.sigma)?,
            eta: c.f64("eta", d.eta)?,
            chains: c.usize("chains", d.chains)?,
            h: c.f64("h", d.h)?,
            c: c.f64("c", d.c)?,
            lambda: c.f64("lambda", d.lambda)?,
            eps: c.f64("eps", d.eps)?,
            alpha: c.f64("alpha", d.alpha)?,
            radius: c.f64("radius", d.radius)?,
            truth_angle: c.f64("truth_angle", d.truth_angle)?,
            oracle_permutations: c.usize("oracle_permutations", d.oracle_permutations)?,
        })
    }
}

pub struct RingPosteriorResult {
    pub params: RingPosteriorParams,
    pub truth: Vec<f64>,
    pub x0: Vec<f64>,
    pub y: Vec<f64>,
    pub artifact: RunArtifact,
}

impl RingPosteriorResult {
    pub fn samples(&self) -> &[Vec<f64>] {
        &self.artifact.samples
    }

    /// Fraction with `| |x| - 1 | <= 4w`.
    pub fn band_fraction(&self) -> f64 {
        let w = self.params.w;
        fraction(self.samples(), |x| (x[0].hypot(x[1]) - 1.0).abs() <= 4.0 * w)
    }

    /// Fraction with `<x, x0> > 0`.
    pub fn halfplane_fraction(&self) -> f64 {
        let a = &self.x0;
        fraction(self.samples(), |x| x[0] * a[0] + x[1] * a[1] > 0.0)
    }
}

fn fraction(samples: &[Vec<f64>], pred: impl Fn(&[f64]) -> bool) -> f64 {
    samples.iter().filter(|x| pred(x)).count() as f64 / samples.len() as f64
}

/// `x = (cos t, sin t)`, `x0 = x + N(0, sigma^2 I)`, `y = x_1 + N(0, eta^2)`,
/// then samples `p(x | x0, y)` with `A = [[1, 0]]`.
pub fn ring_posterior(p: &RingPosteriorParams, seed: u64) -> Result<RingPosteriorResult> {
    let seeds = SeedStream::new(seed);
    let mut setup = seeds.rng(Purpose::Experiment, 0);
    let prior = PriorSpec::ring(p.w)?;
    let model = MeasurementModel::from_rows(1, 2, &[1.0, 0.0], p.eta)?;
    let truth = vec![p.truth_angle.cos(), p.truth_angle.sin()];
    let x0: Vec<f64> = truth.iter().map(|v| v + p.sigma * standard_normal(&mut setup)).collect();
    let y = simulate_measurement(&truth, &model, &mut setup)?;
    let schedule = ScheduleParams::new(p.alpha, 2, 1, p.radius)
        .with_c(p.c)
        .with_lambda(p.lambda)
        .with_eps(p.eps);
    let cfg = RunConfig::new(schedule, StepPolicy::fixed(p.h), p.chains, seeds.child(1).seed);
    let artifact = gaussian_sampler(&prior, &prior, &x0, &y, &model, p.sigma, &cfg)?;
    Ok(RingPosteriorResult {
        params: p.clone(),
        truth,
        x0,
        y,
        artifact,
    })
}

/// Uniform proposals on a box around the anchor, accepted against a grid
/// envelope of the unnormalised posterior built from the quadrature density.
pub fn ring_posterior_rejection_sample<R: Rng + ?Sized>(
    p: &RingPosteriorParams,
    x0: &[f64],
    y: &[f64],
    n: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let half = 8.0 * p.sigma;
    let log_post = |x: [f64; 2]| {
        ring_log_density_quadrature(p.w, 1024, x)
            - ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)) / (2.0 * p.sigma * p.sigma)
            - (y[0] - x[0]).powi(2) / (2.0 * p.eta * p.eta)
    };
    let grid = 200;
    let mut peak = f64::NEG_INFINITY;
    for i in 0..=grid {
        for j in 0..=grid {
            let x = [
                x0[0] - half + 2.0 * half * i as f64 / grid as f64,
                x0[1] - half + 2.0 * half * j as f64 / grid as f64,
            ];
            peak = peak.max(log_post(x));
        }
    }
    let envelope = peak + 0.5;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = [
            x0[0] - half + 2.0 * half * rng.random::<f64>(),
            x0[1] - half + 2.0 * half * rng.random::<f64>(),
        ];
        if rng.random::<f64>().ln() <= log_post(x) - envelope {
            out.push(x.to_vec());
        }
    }
    out
}

pub(crate) fn ring_output(h: &RingHessianParams, p: &RingPosteriorParams, seed: u64) -> Result<ExperimentOutput> {
    let rows = ring_hessian_grid(h)?;
    let mut grid = Table::new(&[
        "r",
        "lambda_radial",
        "lambda_tangential",
        "fd_radial",
        "fd_tangential",
        "rel_err_radial",
        "rel_err_tangential",
        "turan_radial",
    ]);
    for r in &rows {
        grid.push(vec![
            cell(r.r),
            cell(r.radial),
            cell(r.tangential),
            cell(r.fd_radial),
            cell(r.fd_tangential),
            cell((r.radial - r.fd_radial).abs() / r.fd_radial.abs()),
            cell((r.tangential - r.fd_tangential).abs() / r.fd_tangential.abs()),
            cell(r.turan_radial),
        ]);
    }
    let post = ring_posterior(p, seed)?;
    let mut oracle_rng = SeedStream::new(seed).rng(Purpose::Oracle, 0);
    let oracle = ring_posterior_rejection_sample(p, &post.x0, &post.y, p.chains, &mut oracle_rng);
    let test = energy_permutation_test(post.samples(), &oracle, p.oracle_permutations, &mut oracle_rng)?;
    let mut samples = Table::new(&["chain_id", "x_1", "x_2"]);
    for (i, s) in post.samples().iter().enumerate() {
        samples.push(vec![i.to_string(), cell(s[0]), cell(s[1])]);
    }
    let (small_r, small_t) = ring_hessian_eigs(h.w, 1e-4);
    Ok(ExperimentOutput {
        tables: vec![("ring.csv".into(), grid), ("ring_samples.csv".into(), samples)],
        summary: json!({
            "tangential_at_1e-4": small_t,
            "radial_at_1e-4": small_r,
            "center_limit": -1.0 / (h.w * h.w) + 0.5 / h.w.powi(4),
            "anchor": post.x0,
            "y": post.y,
            "rungs": post.artifact.ladder.len(),
            "band_fraction": post.band_fraction(),
            "halfplane_fraction": post.halfplane_fraction(),
            "energy_distance": test.statistic,
            "energy_p_value": test.p_value,
        }),
    })
}
