//! Repeated compressed-sensing recoveries on a Gaussian testbed, scored
//! against the posterior-error quantile of an exact posterior sampler.

use rayon::prelude::*;
use serde_json::json;

use super::setup::random_operator;
use super::{cell, Config, ExperimentOutput, Table};
use crate::error::{Error, Result};
use crate::eval::{gaussian_posterior_closed_form, GaussianSummary};
use crate::langevin::StepPolicy;
use crate::linalg::{self, spd_cholesky};
use crate::measurement::{simulate_measurement, MeasurementModel};
use crate::rng::{fill_standard_normal, Purpose, SeedStream};
use crate::samplers::{compressed_sensing, RunConfig};
use crate::schedule::{concentration_radius, ScheduleParams};
use crate::scores::PriorSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct SensingParams {
    pub d: usize,
    pub m: usize,
    pub eta: f64,
    pub op_norm: f64,
    pub trials: usize,
    pub delta: f64,
    /// Distance of the rough estimate from the truth.
    pub radius: f64,
    pub h: f64,
    pub c: f64,
    pub lambda: f64,
    pub eps: f64,
    pub oracle_draws: usize,
}

impl Default for SensingParams {
    fn default() -> Self {
        Self {
            d: 4,
            m: 2,
            eta: 0.5,
            op_norm: 1.0,
            trials: 500,
            delta: 0.05,
            radius: 1.0,
            h: 0.01,
            c: 1.0,
            lambda: 10.0,
            eps: 0.1,
            oracle_draws: 100_000,
        }
    }
}

impl SensingParams {
    pub fn from_config(c: &mut Config) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            d: c.usize("d", d.d)?,
            m: c.usize("m", d.m)?,
            eta: c.f64("eta", d.eta)?,
            op_norm: c.f64("op_norm", d.op_norm)?,
            trials: c.usize("trials", d.trials)?,
            delta: c.f64("delta", d.delta)?,
            radius: c.f64("radius", d.radius)?,
            h: c.f64("h", d.h)?,
            c: c.f64("c", d.c)?,
            lambda: c.f64("lambda", d.lambda)?,
            eps: c.f64("eps", d.eps)?,
            oracle_draws: c.usize("oracle_draws", d.oracle_draws)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensingResult {
    pub params: SensingParams,
    /// `1 - delta` quantile of `|x_post - x|` under the exact posterior.
    pub r_opt: f64,
    pub errors: Vec<f64>,
    pub rungs: usize,
}

impl SensingResult {
    pub fn failure_rate(&self) -> f64 {
        let bad = self.errors.iter().filter(|&&e| e > 2.0 * self.r_opt).count();
        bad as f64 / self.errors.len() as f64
    }

    pub fn output(&self) -> ExperimentOutput {
        let mut t = Table::new(&["trial", "error", "within_2r"]);
        for (i, e) in self.errors.iter().enumerate() {
            t.push(vec![i.to_string(), cell(*e), (*e <= 2.0 * self.r_opt).to_string()]);
        }
        ExperimentOutput {
            tables: vec![("compressed-sensing.csv".into(), t)],
            summary: json!({
                "r_opt": self.r_opt,
                "failure_rate": self.failure_rate(),
                "failure_budget": 5.0 * self.params.delta,
                "rungs": self.rungs,
            }),
        }
    }
}

/// `q`-quantile of `|z|` for `z ~ N(0, cov)`, by sorting `draws` samples.
pub fn gaussian_norm_quantile(cov: &linalg::Matrix, q: f64, draws: usize, seed: u64) -> Result<f64> {
    if draws == 0 || !(0.0..1.0).contains(&q) {
        return Err(Error::invalid("quantile needs draws >= 1 and q in [0, 1)"));
    }
    let l = spd_cholesky(cov)?;
    let d = cov.nrows();
    let mut rng = SeedStream::new(seed).rng(Purpose::Oracle, 0);
    let mut z = vec![0.0; d];
    let mut norms: Vec<f64> = (0..draws)
        .map(|_| {
            fill_standard_normal(&mut rng, &mut z);
            linalg::norm(&linalg::matvec(&l, &z))
        })
        .collect();
    norms.sort_by(f64::total_cmp);
    Ok(norms[((q * draws as f64).ceil() as usize).min(draws - 1)])
}

pub fn compressed_sensing_trials(p: &SensingParams, seed: u64) -> Result<SensingResult> {
    if p.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let seeds = SeedStream::new(seed);
    let mut setup = seeds.rng(Purpose::Experiment, 0);
    let a = random_operator(p.m, p.d, p.op_norm, &mut setup)?;
    let model = MeasurementModel::new(a, p.eta)?;
    let prior = PriorSpec::standard(p.d);

    let prior_summary = GaussianSummary::isotropic(vec![0.0; p.d], 1.0)?;
    let post = gaussian_posterior_closed_form(&prior_summary, &model, &vec![0.0; p.m])?;
    let r_opt = gaussian_norm_quantile(&(post.cov * 2.0), 1.0 - p.delta, p.oracle_draws, seed)?;

    let sigma = p.radius / p.delta;
    let alpha = 1.0 + 1.0 / (sigma * sigma);
    let schedule = ScheduleParams::new(alpha, p.d, p.m, concentration_radius(p.d, alpha, p.delta))
        .with_c(p.c)
        .with_lambda(p.lambda)
        .with_eps(p.eps);

    let runs: Vec<(f64, usize)> = (0..p.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let s = seeds.child(trial + 1);
            let mut rng = s.rng(Purpose::Experiment, 0);
            let truth = prior.sample(&mut rng);
            let y = simulate_measurement(&truth, &model, &mut rng)?;
            let mut dir = vec![0.0; p.d];
            fill_standard_normal(&mut rng, &mut dir);
            let n = linalg::norm(&dir);
            let x0: Vec<f64> = truth.iter().zip(&dir).map(|(t, u)| t + p.radius * u / n).collect();
            let cfg = RunConfig::new(schedule.clone(), StepPolicy::fixed(p.h), 1, s.child(0).seed);
            let (xhat, art) = compressed_sensing(&prior, &prior, &x0, &y, &model, p.radius, p.delta, &cfg)?;
            let err: Vec<f64> = xhat.iter().zip(&truth).map(|(a, b)| a - b).collect();
            Ok((linalg::norm(&err), art.ladder.len()))
        })
        .collect::<Result<_>>()?;
    Ok(SensingResult {
        params: p.clone(),
        r_opt,
        rungs: runs[0].1,
        errors: runs.into_iter().map(|r| r.0).collect(),
    })
}
