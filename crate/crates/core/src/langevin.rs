//! Euler-Maruyama integration of Langevin-type SDEs `dX = b(X) dt + sqrt(2) dB`.
//!
//! The drift is frozen at the start of every step:
//! `x_{t+h} = x_t + h b(x_t) + sqrt(2h) xi`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::measurement::MeasurementModel;
use crate::rng::{fill_standard_normal, ChainRng};
use crate::scores::{PriorSpec, ScoreOracle};

pub const DEFAULT_GUARD: f64 = 1e6;
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Clone, Debug)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub elapsed: f64,
    pub steps: u64,
    pub rng: ChainRng,
}

impl ChainState {
    pub fn new(x: Vec<f64>, rng: ChainRng) -> Self {
        Self {
            x,
            elapsed: 0.0,
            steps: 0,
            rng,
        }
    }
}

/// Step size `h`, or `None` for the automatic choice of [`AutoStep`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub h: Option<f64>,
    pub max_steps: u64,
    /// Norm above which a chain counts as diverged.
    pub guard: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            h: None,
            max_steps: DEFAULT_MAX_STEPS,
            guard: DEFAULT_GUARD,
        }
    }
}

impl StepPolicy {
    pub fn fixed(h: f64) -> Self {
        Self {
            h: Some(h),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("step size must be positive, got {h}")));
            }
        }
        if self.max_steps == 0 || !(self.guard > 0.0) {
            return Err(Error::invalid("max_steps and guard must be positive"));
        }
        Ok(())
    }

    /// Explicit `h` if set, otherwise the automatic value.
    pub fn resolve(&self, auto: impl FnOnce() -> f64) -> Result<f64> {
        self.validate()?;
        let h = self.h.unwrap_or_else(auto);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("resolved step size is not positive: {h}")));
        }
        Ok(h)
    }
}

/// Inputs of the automatic step size, with `rho = |A| / (eta sqrt(alpha))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoStep {
    pub k: f64,
    pub delta: f64,
    pub lipschitz: f64,
    pub rho: f64,
    pub alpha: f64,
    pub radius: f64,
    pub m: usize,
    pub d: usize,
}

impl AutoStep {
    /// `min{ sqrt(alpha/m) / (K^2 delta alpha (L + rho^2) [alpha R (L + rho^2) + rho sqrt(m alpha)]),
    ///       1 / (K^4 delta^2 alpha m d (L + rho^2)^2) }`.
    pub fn step(&self) -> f64 {
        let (m, d) = (self.m as f64, self.d as f64);
        let l = self.lipschitz + self.rho * self.rho;
        let first = (self.alpha / m).sqrt()
            / (self.k * self.k * self.delta)
            / (self.alpha * l * (self.alpha * self.radius * l + self.rho * (m * self.alpha).sqrt()));
        let second = 1.0 / (self.k.powi(4) * self.delta * self.delta * self.alpha * m * d * l * l);
        first.min(second)
    }
}

/// Time-homogeneous drift `x -> b(x)`.
pub trait Drift: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

pub struct FnDrift<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync> FnDrift<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync> Drift for FnDrift<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(x, out)
    }
}

/// Posterior drift `s(x) + A^T (y - A x) / eta^2` with the linear part precomputed.
pub struct PosteriorDrift<'a> {
    oracle: &'a dyn ScoreOracle,
    precision: linalg::Matrix,
    shift: Vec<f64>,
}

impl<'a> PosteriorDrift<'a> {
    pub fn new(oracle: &'a dyn ScoreOracle, model: &MeasurementModel, y: &[f64], eta: f64) -> Result<Self> {
        check_dim("score oracle", model.cols(), oracle.dim())?;
        check_dim("measurement", model.rows(), y.len())?;
        let inv = 1.0 / (eta * eta);
        let a = model.a();
        let precision = a.transpose() * a * inv;
        let shift = linalg::matvec_t(a, y).iter().map(|v| v * inv).collect();
        Ok(Self {
            oracle,
            precision,
            shift,
        })
    }
}

impl Drift for PosteriorDrift<'_> {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.oracle.score_into(x, 0.0, out)?;
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.precision.column(j).iter()) {
                *o -= p * xj;
            }
        }
        out.iter_mut().zip(&self.shift).for_each(|(o, s)| *o += s);
        Ok(())
    }
}

/// Snapshots `(t, x)` of one chain, taken every `stride` steps and at the end.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub stride: u64,
    pub points: Vec<(f64, Vec<f64>)>,
}

impl Trajectory {
    pub fn new(stride: u64) -> Self {
        Self {
            stride: stride.max(1),
            points: Vec::new(),
        }
    }

    fn record(&mut self, t: f64, x: &[f64]) {
        if self.points.last().is_some_and(|(s, _)| *s == t) {
            return;
        }
        self.points.push((t, x.to_vec()));
    }
}

/// CSV with columns `chain_id,t,x_1..x_d`.
pub fn trajectories_to_csv(trajectories: &[(usize, &Trajectory)]) -> String {
    let d = trajectories
        .iter()
        .find_map(|(_, t)| t.points.first().map(|p| p.1.len()))
        .unwrap_or(0);
    let mut out = String::from("chain_id,t");
    for j in 1..=d {
        let _ = write!(out, ",x_{j}");
    }
    out.push('\n');
    for (id, traj) in trajectories {
        for (t, x) in &traj.points {
            let _ = write!(out, "{id},{t:.17e}");
            for v in x {
                let _ = write!(out, ",{v:.17e}");
            }
            out.push('\n');
        }
    }
    out
}

fn step_plan(t: f64, h: f64, max_steps: u64) -> Result<(u64, f64)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("integration time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok((0, 0.0));
    }
    let ratio = t / h;
    if ratio > max_steps as f64 {
        return Err(Error::StepBudget {
            needed: ratio.ceil().min(u64::MAX as f64) as u64,
            cap: max_steps,
        });
    }
    let mut n = ratio.ceil() as u64;
    let mut last = t - (n - 1) as f64 * h;
    // Floating point can leave a vanishing final step; fold it into the previous one.
    if n > 1 && last <= 1e-12 * h {
        n -= 1;
        last = t - (n - 1) as f64 * h;
    }
    Ok((n.max(1), last))
}

/// Shared integrator for time-dependent drifts `b(s, x)` where `s` is the
/// time since the start of this run.
pub(crate) fn integrate<F>(
    state: &mut ChainState,
    t: f64,
    h: f64,
    policy: &StepPolicy,
    mut drift: F,
    mut trajectory: Option<&mut Trajectory>,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let (n, last) = step_plan(t, h, policy.max_steps)?;
    let d = state.x.len();
    let mut b = vec![0.0; d];
    let mut z = vec![0.0; d];
    let start = state.elapsed;
    if let Some(tr) = trajectory.as_deref_mut() {
        tr.record(start, &state.x);
    }
    let mut s = 0.0;
    for j in 0..n {
        let step = if j + 1 == n { last } else { h };
        drift(s, &state.x, &mut b)?;
        fill_standard_normal(&mut state.rng, &mut z);
        let noise = (2.0 * step).sqrt();
        for ((x, bi), zi) in state.x.iter_mut().zip(&b).zip(&z) {
            *x += step * bi + noise * zi;
        }
        s = if j + 1 == n { t } else { s + step };
        state.steps += 1;
        let norm = linalg::norm(&state.x);
        if !norm.is_finite() || norm > policy.guard {
            return Err(Error::Divergence {
                time: start + s,
                norm,
            });
        }
        if let Some(tr) = trajectory.as_deref_mut() {
            if (j + 1) % tr.stride == 0 || j + 1 == n {
                tr.record(start + s, &state.x);
            }
        }
    }
    state.elapsed = start + t;
    Ok(())
}

/// Advances `state` by time `t` with the drift frozen at the start of each step.
pub fn euler_maruyama_run(
    state: &mut ChainState,
    drift: &dyn Drift,
    t: f64,
    policy: &StepPolicy,
    trajectory: Option<&mut Trajectory>,
) -> Result<()> {
    check_dim("chain state", drift.dim(), state.x.len())?;
    let h = policy.h.ok_or_else(|| Error::invalid("euler_maruyama_run needs an explicit step size"))?;
    policy.validate()?;
    integrate(state, t, h, policy, |_, x, out| drift.eval(x, out), trajectory)
}

/// Unannealed posterior Langevin from an exact prior draw.
pub fn plain_posterior_langevin(
    prior: &PriorSpec,
    model: &MeasurementModel,
    y: &[f64],
    t: f64,
    policy: &StepPolicy,
    mut rng: ChainRng,
    trajectory: Option<&mut Trajectory>,
) -> Result<ChainState> {
    let x = prior.sample(&mut rng);
    let mut state = ChainState::new(x, rng);
    let drift = PosteriorDrift::new(prior, model, y, model.eta())?;
    euler_maruyama_run(&mut state, &drift, t, policy, trajectory)?;
    Ok(state)
}

/// Variance of the unannealed 1D chain started from `N(0, 1)`, averaged over
/// `y`: `e^{-2at} + (1 - e^{-2at}) / a + (1 - e^{-at})^2 / (1 + eta^2)` with
/// `a = (1 + eta^2) / eta^2`.
pub fn variance_curve(t: f64, eta_sq: f64) -> f64 {
    let a = (1.0 + eta_sq) / eta_sq;
    let e1 = (-a * t).exp();
    let e2 = e1 * e1;
    e2 + (1.0 - e2) / a + (1.0 - e1).powi(2) / (1.0 + eta_sq)
}

/// Time of the variance minimum, `eta^2 ln 2 / (1 + eta^2)`.
pub fn variance_minimizer(eta_sq: f64) -> f64 {
    eta_sq * std::f64::consts::LN_2 / (1.0 + eta_sq)
}

/// Approximate draw from `p` by reversing the forward process
/// `dX = -X dt + sqrt(2) dB` run for time `t_total`.
///
/// The marginal at forward time `s` has score `e^s s_{e^{2s}-1}(e^s x)`.
pub fn reverse_diffusion_init(
    oracle: &dyn ScoreOracle,
    d: usize,
    t_total: f64,
    policy: &StepPolicy,
    rng: ChainRng,
) -> Result<Vec<f64>> {
    check_dim("score oracle", d, oracle.dim())?;
    let mut state = ChainState::new(vec![0.0; d], rng);
    fill_standard_normal(&mut state.rng, &mut state.x);
    if t_total == 0.0 {
        return Ok(state.x);
    }
    let h = policy.h.ok_or_else(|| Error::invalid("reverse diffusion needs an explicit step size"))?;
    policy.validate()?;
    let mut scaled = vec![0.0; d];
    integrate(
        &mut state,
        t_total,
        h,
        policy,
        |s, x, out| {
            let fwd = t_total - s;
            let grow = fwd.exp();
            for (sc, xi) in scaled.iter_mut().zip(x) {
                *sc = grow * xi;
            }
            oracle.score_into(&scaled, (2.0 * fwd).exp_m1(), out)?;
            for (o, xi) in out.iter_mut().zip(x) {
                *o = xi + 2.0 * grow * *o;
            }
            Ok(())
        },
        None,
    )?;
    Ok(state.x)
}
