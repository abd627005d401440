//! Variance of unannealed posterior Langevin in 1D, started from the prior.

use rayon::prelude::*;
use serde_json::json;

use super::{cell, variance_with_stderr, Config, ExperimentOutput, Table};
use crate::error::{Error, Result};
use crate::langevin::{euler_maruyama_run, variance_curve, variance_minimizer, ChainState, PosteriorDrift, StepPolicy};
use crate::measurement::MeasurementModel;
use crate::rng::{standard_normal, Purpose, SeedStream};
use crate::scores::PriorSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceCurveParams {
    pub eta_sq: f64,
    pub chains: usize,
    pub h: f64,
    pub grid_points: usize,
    /// Grid spacing is `t* / cells_per_tstar`.
    pub cells_per_tstar: usize,
}

impl Default for VarianceCurveParams {
    fn default() -> Self {
        Self {
            eta_sq: 0.1,
            chains: 20_000,
            h: 1e-4,
            grid_points: 50,
            cells_per_tstar: 4,
        }
    }
}

impl VarianceCurveParams {
    pub fn from_config(c: &mut Config) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            eta_sq: c.f64("eta_sq", d.eta_sq)?,
            chains: c.usize("chains", d.chains)?,
            h: c.f64("h", d.h)?,
            grid_points: c.usize("grid_points", d.grid_points)?,
            cells_per_tstar: c.usize("cells_per_tstar", d.cells_per_tstar)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct VarianceCurveResult {
    pub params: VarianceCurveParams,
    pub t_star: f64,
    pub tstar_index: usize,
    pub grid: Vec<f64>,
    pub analytic: Vec<f64>,
    pub empirical: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl VarianceCurveResult {
    pub fn empirical_argmin(&self) -> usize {
        argmin(&self.empirical)
    }

    pub fn analytic_argmin(&self) -> usize {
        argmin(&self.analytic)
    }

    pub fn output(&self) -> ExperimentOutput {
        let mut t = Table::new(&["t", "analytic_var", "empirical_var", "mc_stderr"]);
        for i in 0..self.grid.len() {
            t.push(vec![
                cell(self.grid[i]),
                cell(self.analytic[i]),
                cell(self.empirical[i]),
                cell(self.stderr[i]),
            ]);
        }
        let k = self.tstar_index;
        ExperimentOutput {
            tables: vec![("variance-curve.csv".into(), t)],
            summary: json!({
                "t_star": self.t_star,
                "tstar_index": k,
                "analytic_at_tstar": self.analytic[k],
                "empirical_at_tstar": self.empirical[k],
                "stderr_at_tstar": self.stderr[k],
                "empirical_argmin": self.empirical_argmin(),
                "analytic_argmin": self.analytic_argmin(),
            }),
        }
    }
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

/// Each chain draws its own `x ~ N(0,1)`, `y = x + eta z`, starts from an
/// independent prior draw and is recorded on the grid `t_j = j t* / cells`.
pub fn variance_curve_experiment(p: &VarianceCurveParams, seed: u64) -> Result<VarianceCurveResult> {
    if !(p.eta_sq > 0.0) || p.chains < 2 || p.grid_points < 2 || p.cells_per_tstar == 0 {
        return Err(Error::invalid("variance curve needs eta_sq > 0, chains >= 2, grid_points >= 2"));
    }
    let eta = p.eta_sq.sqrt();
    let model = MeasurementModel::from_rows(1, 1, &[1.0], eta)?;
    let prior = PriorSpec::standard(1);
    let t_star = variance_minimizer(p.eta_sq);
    let dt = t_star / p.cells_per_tstar as f64;
    let grid: Vec<f64> = (0..p.grid_points).map(|j| j as f64 * dt).collect();
    let policy = StepPolicy::fixed(p.h);
    let seeds = SeedStream::new(seed);

    let paths: Vec<Result<Vec<f64>>> = (0..p.chains)
        .into_par_iter()
        .map(|c| {
            let mut obs_rng = seeds.rng(Purpose::Experiment, c as u64);
            let truth = standard_normal(&mut obs_rng);
            let y = truth + eta * standard_normal(&mut obs_rng);
            let mut rng = seeds.rng(Purpose::Chain, c as u64);
            let x0 = prior.sample(&mut rng);
            let mut state = ChainState::new(x0, rng);
            let drift = PosteriorDrift::new(&prior, &model, &[y], eta)?;
            let mut path = Vec::with_capacity(grid.len());
            path.push(state.x[0]);
            for _ in 1..grid.len() {
                euler_maruyama_run(&mut state, &drift, dt, &policy, None)?;
                path.push(state.x[0]);
            }
            Ok(path)
        })
        .collect();
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;

    let mut empirical = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    let mut column = vec![0.0; p.chains];
    for j in 0..grid.len() {
        for (c, path) in paths.iter().enumerate() {
            column[c] = path[j];
        }
        let (_, v, se) = variance_with_stderr(&column);
        empirical.push(v);
        stderr.push(se);
    }
    Ok(VarianceCurveResult {
        params: p.clone(),
        t_star,
        tstar_index: p.cells_per_tstar,
        analytic: grid.iter().map(|&t| variance_curve(t, p.eta_sq)).collect(),
        grid,
        empirical,
        stderr,
    })
}
