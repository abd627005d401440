//! Problem construction from a flat config, shared by the `run` and
//! `schedule` commands.

use rand::Rng;

use super::Config;
use crate::error::{Error, Result};
use crate::langevin::StepPolicy;
use crate::linalg::{self, Matrix};
use crate::measurement::{simulate_measurement, MeasurementModel};
use crate::rng::{fill_standard_normal, Purpose, SeedStream};
use crate::samplers::{
    compressed_sensing, gaussian_sampler, posterior_sampler, AutoStepKnobs, Initializer, RunArtifact, RunConfig,
    TrajectorySpec,
};
use crate::schedule::{concentration_radius, GammaRule, ScheduleParams};
use crate::scores::PriorSpec;

/// Gaussian matrix rescaled to the requested operator norm.
pub fn random_operator<R: Rng + ?Sized>(m: usize, d: usize, op_norm: f64, rng: &mut R) -> Result<Matrix> {
    if m == 0 || d == 0 || !(op_norm >= 0.0) {
        return Err(Error::invalid("random operator needs m, d >= 1 and op_norm >= 0"));
    }
    let mut entries = vec![0.0; m * d];
    fill_standard_normal(rng, &mut entries);
    let a = Matrix::from_column_slice(m, d, &entries);
    let norm = linalg::operator_norm(&a);
    Ok(a * (op_norm / norm))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Algorithm {
    Posterior,
    Gaussian { x0: Vec<f64>, sigma: f64 },
    CompressedSensing { x0: Vec<f64>, radius: f64, delta: f64 },
}

#[derive(Clone, Debug)]
pub struct ProblemSetup {
    pub prior: PriorSpec,
    pub model: MeasurementModel,
    pub y: Vec<f64>,
    pub truth: Option<Vec<f64>>,
    pub run: RunConfig,
    pub algorithm: Algorithm,
}

fn prior_from_config(c: &mut Config) -> Result<PriorSpec> {
    let kind = c.choice("prior", "gaussian", &["gaussian", "ring", "mixture"])?;
    match kind.as_str() {
        "ring" => PriorSpec::ring(c.f64("ring_width", 0.1)?),
        "mixture" => {
            let centers = c
                .opt_rows("mixture_centers")?
                .ok_or_else(|| Error::Config("mixture prior needs `mixture_centers`".into()))?;
            let k = centers.len();
            let weights = c.opt_list("mixture_weights")?.unwrap_or_else(|| vec![1.0 / k as f64; k]);
            PriorSpec::mixture(weights, centers, c.f64("mixture_variance", 1.0)?)
        }
        _ => {
            let variance = c.f64("prior_variance", 1.0)?;
            match c.opt_list("prior_mean")? {
                Some(mean) => PriorSpec::isotropic(mean, variance),
                None => PriorSpec::isotropic(vec![0.0; c.usize("d", 1)?], variance),
            }
        }
    }
}

impl ProblemSetup {
    /// Reads every problem key; the caller must still call `finish`.
    pub fn from_config(c: &mut Config, seed: u64) -> Result<Self> {
        let prior = prior_from_config(c)?;
        let d = prior.dim();
        let seeds = SeedStream::new(seed);
        let mut setup_rng = seeds.rng(Purpose::Experiment, 0);

        let eta = c.f64("eta", 0.5)?;
        let a = match c.opt_rows("a")? {
            Some(rows) => {
                let m = rows.len();
                if rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!("every row of `a` needs {d} entries")));
                }
                let flat: Vec<f64> = rows.concat();
                Matrix::from_row_slice(m, d, &flat)
            }
            None => {
                let m = c.usize("m", 1)?;
                random_operator(m, d, c.f64("op_norm", 1.0)?, &mut setup_rng)?
            }
        };
        let model = MeasurementModel::new(a, eta)?;
        let m = model.rows();

        let (y, truth) = match c.opt_list("y")? {
            Some(y) => (y, None),
            None => {
                let truth = c.opt_list("x_true")?.unwrap_or_else(|| prior.sample(&mut setup_rng));
                (simulate_measurement(&truth, &model, &mut setup_rng)?, Some(truth))
            }
        };
        if y.len() != m {
            return Err(Error::Config(format!("`y` needs {m} entries, got {}", y.len())));
        }

        let algorithm = match c.choice("algorithm", "posterior", &["posterior", "gaussian", "compressed"])?.as_str() {
            "gaussian" => Algorithm::Gaussian {
                x0: c
                    .opt_list("x0")?
                    .ok_or_else(|| Error::Config("algorithm = gaussian needs `x0`".into()))?,
                sigma: c.f64("sigma", 1.0)?,
            },
            "compressed" => Algorithm::CompressedSensing {
                x0: c
                    .opt_list("x0")?
                    .ok_or_else(|| Error::Config("algorithm = compressed needs `x0`".into()))?,
                radius: c.f64("cs_radius", 1.0)?,
                delta: c.f64("cs_delta", 0.05)?,
            },
            _ => Algorithm::Posterior,
        };

        let conditioning = match &algorithm {
            Algorithm::Posterior => 0.0,
            Algorithm::Gaussian { sigma, .. } => 1.0 / (sigma * sigma),
            Algorithm::CompressedSensing { radius, delta, .. } => (delta / radius).powi(2),
        };
        let alpha = match c.opt_f64("alpha")? {
            Some(a) => a,
            None => prior
                .strong_log_concavity()
                .map(|a| a + conditioning)
                .ok_or_else(|| Error::Config("this prior needs an explicit `alpha`".into()))?,
        };
        let radius = match c.opt_f64("radius")? {
            Some(r) => r,
            None => concentration_radius(d, alpha, c.f64("radius_delta", 0.01)?),
        };
        let rule = match c.choice("gamma_rule", "exact", &["exact", "quadratic"])?.as_str() {
            "quadratic" => GammaRule::Quadratic,
            _ => GammaRule::Exact,
        };
        let schedule = ScheduleParams::new(alpha, d, m, radius)
            .with_c(c.f64("c", crate::schedule::DEFAULT_C)?)
            .with_lambda(c.f64("lambda", crate::schedule::DEFAULT_LAMBDA)?)
            .with_eps(c.f64("eps", crate::schedule::DEFAULT_EPS)?)
            .with_gamma_rule(rule)
            .with_max_rungs(c.usize("max_rungs", crate::schedule::DEFAULT_MAX_RUNGS)?);

        let step = StepPolicy {
            h: c.opt_f64("h")?,
            max_steps: c.usize("max_steps", crate::langevin::DEFAULT_MAX_STEPS as usize)? as u64,
            guard: c.f64("guard", crate::langevin::DEFAULT_GUARD)?,
        };
        let mut run = RunConfig::new(schedule, step, c.usize("chains", 1000)?, seeds.child(1).seed);
        run.auto_step = AutoStepKnobs {
            k: c.f64("auto_k", AutoStepKnobs::default().k)?,
            delta: c.f64("auto_delta", AutoStepKnobs::default().delta)?,
            lipschitz: c.f64("auto_lipschitz", AutoStepKnobs::default().lipschitz)?,
        };
        run.initializer = match c.choice("initializer", "exact", &["exact", "reverse-diffusion"])?.as_str() {
            "reverse-diffusion" => Initializer::ReverseDiffusion {
                time: c.f64("reverse_time", 5.0)?,
                h: c.f64("reverse_h", 1e-3)?,
            },
            _ => Initializer::Exact,
        };
        run.snapshots = c.bool("snapshots", false)?;
        let trajectory_chains = c.usize("trajectory_chains", 0)?;
        let trajectory_stride = c.usize("trajectory_stride", 100)?;
        if trajectory_chains > 0 {
            run.trajectory = Some(TrajectorySpec {
                chains: trajectory_chains,
                stride: trajectory_stride as u64,
            });
        }
        run.validate()?;
        Ok(Self {
            prior,
            model,
            y,
            truth,
            run,
            algorithm,
        })
    }

    /// Runs the configured sampler with exact prior scores. Returns the
    /// artifact and, for compressed sensing, the reconstruction.
    pub fn execute(&self) -> Result<(RunArtifact, Option<Vec<f64>>)> {
        let oracle = &self.prior;
        match &self.algorithm {
            Algorithm::Posterior => Ok((posterior_sampler(&self.prior, oracle, &self.y, &self.model, &self.run)?, None)),
            Algorithm::Gaussian { x0, sigma } => Ok((
                gaussian_sampler(&self.prior, oracle, x0, &self.y, &self.model, *sigma, &self.run)?,
                None,
            )),
            Algorithm::CompressedSensing { x0, radius, delta } => {
                let (xhat, art) =
                    compressed_sensing(&self.prior, oracle, x0, &self.y, &self.model, *radius, *delta, &self.run)?;
                Ok((art, Some(xhat)))
            }
        }
    }
}
