//! Score oracles: exact analytic scores, posterior assembly, conditioning on
//! an extra Gaussian measurement, and shell-supported perturbations.

mod prior;
pub mod ring;
mod shell;

use std::sync::Arc;

pub use prior::{GaussianParams, PriorSpec};
pub use ring::{ring_hessian_eigs, sample_von_mises};
pub use shell::{shell_perturbed_oracle, ShellPerturbation, ShellPerturbed};

use crate::error::{check_dim, Error, Result};
use crate::measurement::MeasurementModel;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ErrorBudget {
    Exact,
    ShellPerturbed { magnitude: f64, shell_mass: f64 },
}

/// Evaluates `s_{sigma^2}(x)`, the score of `p * N(0, sigma^2 I)`.
pub trait ScoreOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn score_into(&self, x: &[f64], sigma_sq: f64, out: &mut [f64]) -> Result<()>;

    fn score(&self, x: &[f64], sigma_sq: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, sigma_sq, &mut out)?;
        Ok(out)
    }

    /// Log density up to an additive constant, when analytic.
    fn log_density(&self, _x: &[f64], _sigma_sq: f64) -> Option<Result<f64>> {
        None
    }

    fn budget(&self) -> ErrorBudget {
        ErrorBudget::Exact
    }
}

impl ScoreOracle for PriorSpec {
    fn dim(&self) -> usize {
        PriorSpec::dim(self)
    }

    fn score_into(&self, x: &[f64], sigma_sq: f64, out: &mut [f64]) -> Result<()> {
        PriorSpec::score_into(self, x, sigma_sq, out)
    }

    fn log_density(&self, x: &[f64], sigma_sq: f64) -> Option<Result<f64>> {
        Some(PriorSpec::log_density(self, x, sigma_sq))
    }
}

impl<T: ScoreOracle + ?Sized> ScoreOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score_into(&self, x: &[f64], sigma_sq: f64, out: &mut [f64]) -> Result<()> {
        (**self).score_into(x, sigma_sq, out)
    }
    fn log_density(&self, x: &[f64], sigma_sq: f64) -> Option<Result<f64>> {
        (**self).log_density(x, sigma_sq)
    }
    fn budget(&self) -> ErrorBudget {
        (**self).budget()
    }
}

impl<T: ScoreOracle + ?Sized> ScoreOracle for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score_into(&self, x: &[f64], sigma_sq: f64, out: &mut [f64]) -> Result<()> {
        (**self).score_into(x, sigma_sq, out)
    }
    fn log_density(&self, x: &[f64], sigma_sq: f64) -> Option<Result<f64>> {
        (**self).log_density(x, sigma_sq)
    }
    fn budget(&self) -> ErrorBudget {
        (**self).budget()
    }
}

impl<T: ScoreOracle + ?Sized> ScoreOracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score_into(&self, x: &[f64], sigma_sq: f64, out: &mut [f64]) -> Result<()> {
        (**self).score_into(x, sigma_sq, out)
    }
    fn log_density(&self, x: &[f64], sigma_sq: f64) -> Option<Result<f64>> {
        (**self).log_density(x, sigma_sq)
    }
    fn budget(&self) -> ErrorBudget {
        (**self).budget()
    }
}

/// Oracle backed by a closure `(x, sigma_sq, out)`.
pub struct FnScore<F> {
    dim: usize,
    f: F,
}

impl<F> FnScore<F>
where
    F: Fn(&[f64], f64, &mut [f64]) -> Result<()> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> ScoreOracle for FnScore<F>
where
    F: Fn(&[f64], f64, &mut [f64]) -> Result<()> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_into(&self, x: &[f64], sigma_sq: f64, out: &mut [f64]) -> Result<()> {
        check_dim("point", self.dim, x.len())?;
        (self.f)(x, sigma_sq, out)
    }
}

pub fn prior_score(prior: &PriorSpec, x: &[f64]) -> Result<Vec<f64>> {
    prior.score(x, 0.0)
}

pub fn smoothed_score(prior: &PriorSpec, sigma_sq: f64, x: &[f64]) -> Result<Vec<f64>> {
    prior.score(x, sigma_sq)
}

/// `s(x) + A^T (y - A x) / eta^2`.
pub fn posterior_score(base: &dyn ScoreOracle, model: &MeasurementModel, y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_dim("point", model.cols(), x.len())?;
    let mut s = base.score(x, 0.0)?;
    let g = model.likelihood_gradient(y, x, model.eta())?;
    s.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    Ok(s)
}

/// `grad_Y log N(Z; c Y, v I)` with `c = s2 / (s1 + s2)`, `v = s1 s2 / (s1 + s2)`,
/// which simplifies to `(Z - c Y) / s1`.
pub fn conditional_gaussian_score(y: &[f64], z: &[f64], sigma1_sq: f64, sigma2_sq: f64) -> Result<Vec<f64>> {
    check_dim("Z", y.len(), z.len())?;
    if !(sigma1_sq > 0.0 && sigma2_sq > 0.0) {
        return Err(Error::invalid("conditional Gaussian variances must be positive"));
    }
    let c = sigma2_sq / (sigma1_sq + sigma2_sq);
    Ok(y.iter().zip(z).map(|(yi, zi)| (zi - c * yi) / sigma1_sq).collect())
}

/// Score at `x` of `p_{x0} * N(0, t_sq I)` where `p_{x0}(x) ∝ p(x) N(x0; x, sigma_sq I)`:
///
/// `(x0 - x) / (sigma_sq + t_sq) + sigma_sq / (sigma_sq + t_sq) * s_{tau^2}(m)`
///
/// with `tau^2 = sigma_sq t_sq / (sigma_sq + t_sq)` and
/// `m = (t_sq x0 + sigma_sq x) / (sigma_sq + t_sq)`.
pub fn conditioned_smoothed_score_into(
    base: &dyn ScoreOracle,
    x0: &[f64],
    sigma_sq: f64,
    t_sq: f64,
    x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    check_dim("anchor", base.dim(), x0.len())?;
    check_dim("point", base.dim(), x.len())?;
    if !(sigma_sq > 0.0) || !(t_sq >= 0.0) {
        return Err(Error::invalid("need sigma^2 > 0 and t^2 >= 0"));
    }
    if sigma_sq.is_infinite() {
        return base.score_into(x, t_sq, out);
    }
    let total = sigma_sq + t_sq;
    let tau_sq = sigma_sq * t_sq / total;
    let mid: Vec<f64> = x0.iter().zip(x).map(|(a, b)| (t_sq * a + sigma_sq * b) / total).collect();
    base.score_into(&mid, tau_sq, out)?;
    let w = sigma_sq / total;
    for ((o, a), b) in out.iter_mut().zip(x0).zip(x) {
        *o = w * *o + (a - b) / total;
    }
    Ok(())
}

pub fn conditioned_smoothed_score(
    base: &dyn ScoreOracle,
    x0: &[f64],
    sigma_sq: f64,
    t_sq: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; base.dim()];
    conditioned_smoothed_score_into(base, x0, sigma_sq, t_sq, x, &mut out)?;
    Ok(out)
}

/// Oracle for `p_{x0}(x) ∝ p(x) N(x0; x, sigma_sq I)` built on a base oracle.
#[derive(Clone, Debug)]
pub struct Conditioned<O> {
    base: O,
    x0: Vec<f64>,
    sigma_sq: f64,
}

impl<O: ScoreOracle> Conditioned<O> {
    pub fn new(base: O, x0: Vec<f64>, sigma_sq: f64) -> Result<Self> {
        check_dim("anchor", base.dim(), x0.len())?;
        if !(sigma_sq > 0.0) {
            return Err(Error::invalid("conditioning variance must be positive"));
        }
        Ok(Self { base, x0, sigma_sq })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.x0
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }
}

impl<O: ScoreOracle> ScoreOracle for Conditioned<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn score_into(&self, x: &[f64], t_sq: f64, out: &mut [f64]) -> Result<()> {
        conditioned_smoothed_score_into(&self.base, &self.x0, self.sigma_sq, t_sq, x, out)
    }

    fn log_density(&self, x: &[f64], t_sq: f64) -> Option<Result<f64>> {
        if self.sigma_sq.is_infinite() {
            return self.base.log_density(x, t_sq);
        }
        let total = self.sigma_sq + t_sq;
        let tau_sq = self.sigma_sq * t_sq / total;
        let mid: Vec<f64> = self
            .x0
            .iter()
            .zip(x)
            .map(|(a, b)| (t_sq * a + self.sigma_sq * b) / total)
            .collect();
        let gap: f64 = self.x0.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        self.base
            .log_density(&mid, tau_sq)
            .map(|r| r.map(|l| l - 0.5 * gap / total))
    }

    fn budget(&self) -> ErrorBudget {
        self.base.budget()
    }
}

/// Central finite-difference gradient, used by the consistency checks.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + step;
            let up = f(&p);
            p[i] = x[i] - step;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}
