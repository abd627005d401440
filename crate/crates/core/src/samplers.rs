//! Top-level samplers: annealed posterior sampling, posterior sampling given an
//! extra Gaussian measurement `x0 = x + N(0, sigma^2 I)`, and compressed
//! sensing from a rough estimate.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::langevin::{self, trajectories_to_csv, AutoStep, ChainState, PosteriorDrift, StepPolicy, Trajectory};
use crate::measurement::{build_coupled_ladder, CoupledObservations, MeasurementModel};
use crate::rng::{standard_normal, ChainRng, Purpose, SeedStream};
use crate::schedule::{build_admissible_schedule, NoiseLadder, ScheduleParams};
use crate::scores::{shell_perturbed_oracle, Conditioned, PriorSpec, ScoreOracle, ShellPerturbation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Initializer {
    /// Exact draw from the (conditioned) prior.
    Exact,
    /// Reverse variance-preserving diffusion for `time` with step `h`.
    ReverseDiffusion { time: f64, h: f64 },
}

/// Knobs of the automatic step size; `rho`, `alpha`, `R`, `m`, `d` come from
/// the run itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoStepKnobs {
    pub k: f64,
    pub delta: f64,
    pub lipschitz: f64,
}

impl Default for AutoStepKnobs {
    fn default() -> Self {
        Self {
            k: 10.0,
            delta: 0.1,
            lipschitz: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub schedule: ScheduleParams,
    pub step: StepPolicy,
    pub auto_step: AutoStepKnobs,
    pub chains: usize,
    pub initializer: Initializer,
    pub perturbation: Option<ShellPerturbation>,
    pub seed: u64,
    /// Keep the whole ensemble after every rung.
    pub snapshots: bool,
    #[serde(default)]
    pub trajectory: Option<TrajectorySpec>,
}

/// Record the path of the first `chains` chains every `stride` steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub chains: usize,
    pub stride: u64,
}

impl RunConfig {
    pub fn new(schedule: ScheduleParams, step: StepPolicy, chains: usize, seed: u64) -> Self {
        Self {
            schedule,
            step,
            auto_step: AutoStepKnobs::default(),
            chains,
            initializer: Initializer::Exact,
            perturbation: None,
            seed,
            snapshots: false,
            trajectory: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::invalid("need at least one chain"));
        }
        self.schedule.validate()?;
        self.step.validate()?;
        if let Initializer::ReverseDiffusion { time, h } = self.initializer {
            if !(time >= 0.0 && h > 0.0) {
                return Err(Error::invalid("reverse diffusion needs time >= 0 and h > 0"));
            }
        }
        Ok(())
    }

    fn step_size(&self, model: &MeasurementModel) -> Result<f64> {
        let p = &self.schedule;
        self.step.resolve(|| {
            AutoStep {
                k: self.auto_step.k,
                delta: self.auto_step.delta,
                lipschitz: self.auto_step.lipschitz,
                rho: model.op_norm() / (model.eta() * p.alpha.sqrt()),
                alpha: p.alpha,
                radius: p.radius,
                m: p.m,
                d: p.d,
            }
            .step()
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunArtifact {
    pub seed: u64,
    pub chains: usize,
    pub step_size: f64,
    pub initializer: Initializer,
    pub ladder: NoiseLadder,
    pub observations: CoupledObservations,
    pub total_steps: u64,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
    /// `snapshots[i]` is the ensemble after `i` rungs (index 0: initial draws).
    #[serde(skip)]
    pub snapshots: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub samples_path: Option<PathBuf>,
    /// `(chain_id, path)` for the chains selected by [`RunConfig::trajectory`].
    #[serde(skip)]
    pub trajectories: Vec<(usize, Trajectory)>,
    #[serde(default)]
    pub trajectory_path: Option<PathBuf>,
}

impl RunArtifact {
    /// CSV with columns `chain_id,x_1..x_d`.
    pub fn samples_csv(&self) -> String {
        let d = self.samples.first().map_or(0, |s| s.len());
        let mut out = String::from("chain_id");
        for j in 1..=d {
            let _ = write!(out, ",x_{j}");
        }
        out.push('\n');
        for (i, s) in self.samples.iter().enumerate() {
            let _ = write!(out, "{i}");
            for v in s {
                let _ = write!(out, ",{v:.17e}");
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>_samples.csv` into `dir`.
    pub fn write(&mut self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}_samples.csv"));
        std::fs::write(&csv, self.samples_csv())?;
        self.samples_path = Some(csv.file_name().map(PathBuf::from).unwrap_or(csv));
        if !self.trajectories.is_empty() {
            let path = dir.join(format!("{stem}_trajectory.csv"));
            let refs: Vec<(usize, &Trajectory)> = self.trajectories.iter().map(|(i, t)| (*i, t)).collect();
            std::fs::write(&path, trajectories_to_csv(&refs))?;
            self.trajectory_path = Some(path.file_name().map(PathBuf::from).unwrap_or(path));
        }
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, serde_json::to_string_pretty(self)?)?;
        Ok(json)
    }
}

fn perturbed<'a>(oracle: &'a dyn ScoreOracle, cfg: &RunConfig) -> Result<Box<dyn ScoreOracle + 'a>> {
    Ok(match &cfg.perturbation {
        Some(spec) => Box::new(shell_perturbed_oracle(oracle, spec.clone())?),
        None => Box::new(oracle),
    })
}

struct ChainOutcome {
    x: Vec<f64>,
    steps: u64,
    snapshots: Vec<Vec<f64>>,
    trajectory: Option<Trajectory>,
}

/// Runs every chain through the ladder. `init` draws the starting point.
fn annealed_run<I>(
    oracle: &dyn ScoreOracle,
    init: I,
    y: &[f64],
    model: &MeasurementModel,
    cfg: &RunConfig,
) -> Result<RunArtifact>
where
    I: Fn(&mut ChainRng) -> Result<Vec<f64>> + Sync,
{
    let started = Instant::now();
    cfg.validate()?;
    check_dim("measurement", model.rows(), y.len())?;
    check_dim("score oracle", model.cols(), oracle.dim())?;
    let ladder = build_admissible_schedule(model, &cfg.schedule)?;
    let seeds = SeedStream::new(cfg.seed);
    let observations = build_coupled_ladder(y, &ladder, &mut seeds.rng(Purpose::Ladder, 0))?;
    let h = cfg.step_size(model)?;
    let oracle = perturbed(oracle, cfg)?;
    let drifts = (1..ladder.len())
        .map(|i| PosteriorDrift::new(oracle.as_ref(), model, observations.get(i), ladder.etas()[i]))
        .collect::<Result<Vec<_>>>()?;
    let policy = StepPolicy {
        h: Some(h),
        ..cfg.step
    };
    let times = ladder.times();

    let outcomes: Vec<Result<ChainOutcome>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut init_rng = seeds.rng(Purpose::Init, c as u64);
            let x = init(&mut init_rng)?;
            let mut state = ChainState::new(x, seeds.rng(Purpose::Chain, c as u64));
            let mut snapshots = Vec::new();
            if cfg.snapshots {
                snapshots.push(state.x.clone());
            }
            let mut trajectory = cfg
                .trajectory
                .filter(|t| c < t.chains)
                .map(|t| Trajectory::new(t.stride));
            for (i, drift) in drifts.iter().enumerate() {
                langevin::euler_maruyama_run(&mut state, drift, times[i], &policy, trajectory.as_mut())
                    .map_err(|e| e.at_rung(i + 1))?;
                if cfg.snapshots {
                    snapshots.push(state.x.clone());
                }
            }
            Ok(ChainOutcome {
                x: state.x,
                steps: state.steps,
                snapshots,
                trajectory,
            })
        })
        .collect();

    let mut samples = Vec::with_capacity(cfg.chains);
    let mut per_chain_snaps = Vec::new();
    let mut total_steps = 0;
    let mut trajectories = Vec::new();
    for (c, outcome) in outcomes.into_iter().enumerate() {
        let o = outcome?;
        if let Some(t) = o.trajectory {
            trajectories.push((c, t));
        }
        total_steps += o.steps;
        samples.push(o.x);
        per_chain_snaps.push(o.snapshots);
    }
    let snapshots = cfg.snapshots.then(|| {
        (0..ladder.len())
            .map(|i| per_chain_snaps.iter().map(|s| s[i].clone()).collect())
            .collect()
    });
    Ok(RunArtifact {
        seed: cfg.seed,
        chains: cfg.chains,
        step_size: h,
        initializer: cfg.initializer,
        ladder,
        observations,
        total_steps,
        wall_time_s: started.elapsed().as_secs_f64(),
        samples,
        snapshots,
        samples_path: None,
        trajectories,
        trajectory_path: None,
    })
}

fn initial_draw(
    prior: &PriorSpec,
    oracle: &dyn ScoreOracle,
    cfg: &RunConfig,
    rng: &mut ChainRng,
    exact: impl Fn(&mut ChainRng) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    match cfg.initializer {
        Initializer::Exact => exact(rng),
        Initializer::ReverseDiffusion { time, h } => {
            let policy = StepPolicy {
                h: Some(h),
                ..cfg.step
            };
            langevin::reverse_diffusion_init(oracle, prior.dim(), time, &policy, rng.clone())
        }
    }
}

/// Annealed Langevin posterior sampling of `p(x | y)`.
pub fn posterior_sampler(
    prior: &PriorSpec,
    oracle: &dyn ScoreOracle,
    y: &[f64],
    model: &MeasurementModel,
    cfg: &RunConfig,
) -> Result<RunArtifact> {
    check_dim("prior", model.cols(), prior.dim())?;
    annealed_run(
        oracle,
        |rng| initial_draw(prior, oracle, cfg, rng, |r| Ok(prior.sample(r))),
        y,
        model,
        cfg,
    )
}

/// Samples `p(x | x0, y)` where `x0 = x + N(0, sigma^2 I)` by annealing on the
/// conditioned prior `p_{x0}(x) ∝ p(x) N(x0; x, sigma^2 I)`.
/// `cfg.schedule.alpha` must be the strong log-concavity of `p_{x0}`.
pub fn gaussian_sampler(
    prior: &PriorSpec,
    oracle: &dyn ScoreOracle,
    x0: &[f64],
    y: &[f64],
    model: &MeasurementModel,
    sigma: f64,
    cfg: &RunConfig,
) -> Result<RunArtifact> {
    check_dim("prior", model.cols(), prior.dim())?;
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let sigma_sq = sigma * sigma;
    let conditioned = Conditioned::new(oracle, x0.to_vec(), sigma_sq)?;
    annealed_run(
        &conditioned,
        |rng| initial_draw(prior, &conditioned, cfg, rng, |r| prior.sample_conditioned(x0, sigma_sq, r)),
        y,
        model,
        cfg,
    )
}

/// Perturbs the rough estimate with `N(0, (R/delta)^2 I)`, samples the
/// conditioned posterior and returns the first chain as the reconstruction.
#[allow(clippy::too_many_arguments)]
pub fn compressed_sensing(
    prior: &PriorSpec,
    oracle: &dyn ScoreOracle,
    x0: &[f64],
    y: &[f64],
    model: &MeasurementModel,
    radius: f64,
    delta: f64,
    cfg: &RunConfig,
) -> Result<(Vec<f64>, RunArtifact)> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("R must be positive, got {radius}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    check_dim("rough estimate", model.cols(), x0.len())?;
    let sigma = radius / delta;
    let mut rng = SeedStream::new(cfg.seed).rng(Purpose::Warmstart, 0);
    let anchor: Vec<f64> = x0.iter().map(|v| v + sigma * standard_normal(&mut rng)).collect();
    let artifact = gaussian_sampler(prior, oracle, &anchor, y, model, sigma, cfg)?;
    let xhat = artifact.samples[0].clone();
    Ok((xhat, artifact))
}
