//! Annealed sampling against a Gaussian prior, checked against conjugacy at
//! the end of the ladder and after every rung.

use serde_json::json;

use super::setup::random_operator;
use super::{cell, Config, ExperimentOutput, Table};
use crate::error::Result;
use crate::eval::{gaussian_posterior_closed_form, sample_moments, GaussianSummary};
use crate::langevin::StepPolicy;
use crate::linalg::Matrix;
use crate::measurement::{simulate_measurement, MeasurementModel};
use crate::rng::{Purpose, SeedStream};
use crate::samplers::{posterior_sampler, RunArtifact, RunConfig};
use crate::schedule::{concentration_radius, ScheduleParams};
use crate::scores::PriorSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPosteriorParams {
    pub d: usize,
    pub m: usize,
    pub eta: f64,
    pub op_norm: f64,
    pub chains: usize,
    pub h: f64,
    pub c: f64,
    pub lambda: f64,
    pub eps: f64,
    /// Locality radius; defaults to the `1 - radius_delta` concentration radius of the prior.
    pub radius: Option<f64>,
    pub radius_delta: f64,
    pub snapshots: bool,
}

impl Default for GaussianPosteriorParams {
    fn default() -> Self {
        Self {
            d: 8,
            m: 3,
            eta: 0.5,
            op_norm: 1.0,
            chains: 10_000,
            h: 0.01,
            c: 1.0,
            lambda: 10.0,
            eps: 0.1,
            radius: None,
            radius_delta: 0.01,
            snapshots: true,
        }
    }
}

impl GaussianPosteriorParams {
    pub fn from_config(c: &mut Config) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            d: c.usize("d", d.d)?,
            m: c.usize("m", d.m)?,
            eta: c.f64("eta", d.eta)?,
            op_norm: c.f64("op_norm", d.op_norm)?,
            chains: c.usize("chains", d.chains)?,
            h: c.f64("h", d.h)?,
            c: c.f64("c", d.c)?,
            lambda: c.f64("lambda", d.lambda)?,
            eps: c.f64("eps", d.eps)?,
            radius: c.opt_f64("radius")?,
            radius_delta: c.f64("radius_delta", d.radius_delta)?,
            snapshots: d.snapshots,
        })
    }
}

/// Ensemble vs analytic moments at one rung.
#[derive(Clone, Debug)]
pub struct RungCheck {
    /// Rungs completed (0 = initial draws).
    pub rung: usize,
    pub eta: f64,
    /// `(sample mean - analytic mean) / stderr` per coordinate.
    pub z: Vec<f64>,
    pub cov_rel_frobenius: f64,
}

impl RungCheck {
    pub fn max_abs_z(&self) -> f64 {
        self.z.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn mean_ok(&self) -> bool {
        self.max_abs_z() <= 3.0
    }

    pub fn cov_ok(&self) -> bool {
        self.cov_rel_frobenius <= 0.10
    }
}

pub struct GaussianPosteriorResult {
    pub params: GaussianPosteriorParams,
    pub model: MeasurementModel,
    pub y: Vec<f64>,
    pub truth: Vec<f64>,
    pub analytic: GaussianSummary,
    pub artifact: RunArtifact,
    pub final_check: RungCheck,
    pub rungs: Vec<RungCheck>,
}

/// Compares an ensemble with a Gaussian. Standard errors use the sample variances.
pub fn compare_moments(samples: &[Vec<f64>], target: &GaussianSummary) -> Result<(Vec<f64>, f64)> {
    let (mean, cov) = sample_moments(samples)?;
    let n = samples.len() as f64;
    let z = (0..mean.len())
        .map(|j| (mean[j] - target.mean[j]) / (cov[(j, j)] / n).sqrt())
        .collect();
    let rel = (&cov - &target.cov).norm() / target.cov.norm();
    Ok((z, rel))
}

pub fn gaussian_posterior(p: &GaussianPosteriorParams, seed: u64) -> Result<GaussianPosteriorResult> {
    let seeds = SeedStream::new(seed);
    let mut setup_rng = seeds.rng(Purpose::Experiment, 0);
    let a = random_operator(p.m, p.d, p.op_norm, &mut setup_rng)?;
    let model = MeasurementModel::new(a, p.eta)?;
    let prior = PriorSpec::standard(p.d);
    let truth = prior.sample(&mut setup_rng);
    let y = simulate_measurement(&truth, &model, &mut setup_rng)?;

    let radius = p.radius.unwrap_or_else(|| concentration_radius(p.d, 1.0, p.radius_delta));
    let schedule = ScheduleParams::new(1.0, p.d, p.m, radius)
        .with_c(p.c)
        .with_lambda(p.lambda)
        .with_eps(p.eps);
    let mut cfg = RunConfig::new(schedule, StepPolicy::fixed(p.h), p.chains, seeds.child(1).seed);
    cfg.snapshots = p.snapshots;
    let artifact = posterior_sampler(&prior, &prior, &y, &model, &cfg)?;

    let prior_summary = GaussianSummary::isotropic(vec![0.0; p.d], 1.0)?;
    let analytic = gaussian_posterior_closed_form(&prior_summary, &model, &y)?;
    let (z, rel) = compare_moments(&artifact.samples, &analytic)?;
    let final_check = RungCheck {
        rung: artifact.ladder.len() - 1,
        eta: p.eta,
        z,
        cov_rel_frobenius: rel,
    };

    let mut rungs = Vec::new();
    if let Some(snaps) = &artifact.snapshots {
        for (i, ensemble) in snaps.iter().enumerate().skip(1) {
            let eta_i = artifact.ladder.etas()[i];
            let rung_model = model.with_eta(eta_i)?;
            let target = gaussian_posterior_closed_form(&prior_summary, &rung_model, artifact.observations.get(i))?;
            let (z, rel) = compare_moments(ensemble, &target)?;
            rungs.push(RungCheck {
                rung: i,
                eta: eta_i,
                z,
                cov_rel_frobenius: rel,
            });
        }
    }
    Ok(GaussianPosteriorResult {
        params: p.clone(),
        model,
        y,
        truth,
        analytic,
        artifact,
        final_check,
        rungs,
    })
}

impl GaussianPosteriorResult {
    fn summary(&self) -> serde_json::Value {
        json!({
            "rungs": self.artifact.ladder.len(),
            "op_norm": self.model.op_norm(),
            "step_size": self.artifact.step_size,
            "total_steps": self.artifact.total_steps,
            "final_max_abs_z": self.final_check.max_abs_z(),
            "final_cov_rel_frobenius": self.final_check.cov_rel_frobenius,
            "rung_mean_failures": self.rungs.iter().filter(|r| !r.mean_ok()).count(),
            "rung_cov_failures": self.rungs.iter().filter(|r| !r.cov_ok()).count(),
        })
    }

    pub fn final_output(&self) -> ExperimentOutput {
        let (mean, _) = sample_moments(&self.artifact.samples).unwrap_or_else(|_| (vec![], Matrix::zeros(0, 0)));
        let mut t = Table::new(&["coordinate", "sample_mean", "analytic_mean", "z", "analytic_var"]);
        for j in 0..self.params.d {
            t.push(vec![
                (j + 1).to_string(),
                cell(mean.get(j).copied().unwrap_or(f64::NAN)),
                cell(self.analytic.mean[j]),
                cell(self.final_check.z[j]),
                cell(self.analytic.cov[(j, j)]),
            ]);
        }
        ExperimentOutput {
            tables: vec![
                ("gaussian-posterior.csv".into(), t),
                ("gaussian-posterior_schedule.csv".into(), ladder_table(&self.artifact)),
            ],
            summary: self.summary(),
        }
    }

    pub fn rung_output(&self) -> ExperimentOutput {
        let mut t = Table::new(&["rung", "eta", "max_abs_z", "cov_rel_frobenius", "mean_ok", "cov_ok"]);
        for r in &self.rungs {
            t.push(vec![
                r.rung.to_string(),
                cell(r.eta),
                cell(r.max_abs_z()),
                cell(r.cov_rel_frobenius),
                r.mean_ok().to_string(),
                r.cov_ok().to_string(),
            ]);
        }
        ExperimentOutput {
            tables: vec![("rung-stability.csv".into(), t)],
            summary: self.summary(),
        }
    }
}

pub(crate) fn ladder_table(artifact: &RunArtifact) -> Table {
    let ladder = &artifact.ladder;
    let mut t = Table::new(&["index", "eta", "gamma", "T"]);
    for (i, eta) in ladder.etas().iter().enumerate() {
        let (g, tt) = match (ladder.gammas().get(i), ladder.times().get(i)) {
            (Some(g), Some(tt)) => (cell(*g), cell(*tt)),
            _ => (String::new(), String::new()),
        };
        t.push(vec![(i + 1).to_string(), cell(*eta), g, tt]);
    }
    t
}
