//! Score error supported on a thin chi-square shell.
//!
//! The shell `S = {x : | |x|^2 - sigma^2 d | <= rho sigma^2 d}` carries little
//! mass under `N(0, I_d)` but almost all of it under `N(0, sigma^2 I_d)`.
//! The error `e(x) = M 1_S(x) u` with `M = eps * m_shell^(-1/k)` has
//! `E_{N(0,I)} |e|^k = eps^k` exactly.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::scores::{ErrorBudget, ScoreOracle};
use crate::special::chi_square_cdf;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPerturbation {
    pub rho: f64,
    pub k: f64,
    pub eps: f64,
    pub u: Vec<f64>,
    pub sigma_sq: f64,
}

impl ShellPerturbation {
    pub fn new(rho: f64, k: f64, eps: f64, u: Vec<f64>, sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq > 0.0 && sigma_sq < 1.0) {
            return Err(Error::invalid(format!("shell variance must lie in (0, 1), got {sigma_sq}")));
        }
        let rho_max = 0.5_f64.min(1.0 / sigma_sq - 1.0);
        if !(rho > 0.0 && rho < rho_max) {
            return Err(Error::invalid(format!("rho must lie in (0, {rho_max}), got {rho}")));
        }
        if !(k > 1.0 && k.is_finite()) {
            return Err(Error::invalid(format!("k must exceed 1, got {k}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
        }
        if u.is_empty() || (linalg::norm(&u) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("perturbation direction must be a unit vector"));
        }
        Ok(Self {
            rho,
            k,
            eps,
            u,
            sigma_sq,
        })
    }

    /// Direction `e_1` in dimension `d`.
    pub fn along_first_axis(d: usize, rho: f64, k: f64, eps: f64, sigma_sq: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut u = vec![0.0; d];
        u[0] = 1.0;
        Self::new(rho, k, eps, u, sigma_sq)
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// `Pr_{x ~ N(0, I_d)}[x in S]` from the exact chi-square CDF.
    pub fn shell_mass(&self) -> f64 {
        let d = self.dim();
        let centre = self.sigma_sq * d as f64;
        chi_square_cdf(d, (1.0 + self.rho) * centre) - chi_square_cdf(d, (1.0 - self.rho) * centre)
    }

    /// `M = eps * m_shell^(-1/k)`.
    pub fn magnitude(&self) -> f64 {
        self.eps * self.shell_mass().powf(-1.0 / self.k)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let centre = self.sigma_sq * x.len() as f64;
        (linalg::norm_sq(x) - centre).abs() <= self.rho * centre
    }

    /// `e(x)` written into `out`.
    pub fn error_into(&self, x: &[f64], magnitude: f64, out: &mut [f64]) {
        if self.contains(x) {
            for (o, u) in out.iter_mut().zip(&self.u) {
                *o = magnitude * u;
            }
        } else {
            out.iter_mut().for_each(|o| *o = 0.0);
        }
    }
}

/// A base oracle whose unsmoothed queries are shifted by `e(x)`.
#[derive(Clone, Debug)]
pub struct ShellPerturbed<O> {
    base: O,
    spec: ShellPerturbation,
    magnitude: f64,
    shell_mass: f64,
}

impl<O: ScoreOracle> ShellPerturbed<O> {
    pub fn spec(&self) -> &ShellPerturbation {
        &self.spec
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn shell_mass(&self) -> f64 {
        self.shell_mass
    }

    pub fn base(&self) -> &O {
        &self.base
    }
}

pub fn shell_perturbed_oracle<O: ScoreOracle>(base: O, spec: ShellPerturbation) -> Result<ShellPerturbed<O>> {
    check_dim("perturbation direction", base.dim(), spec.dim())?;
    let shell_mass = spec.shell_mass();
    if !(shell_mass > 0.0) {
        return Err(Error::invalid("shell has zero mass under the standard Gaussian"));
    }
    let magnitude = spec.eps * shell_mass.powf(-1.0 / spec.k);
    Ok(ShellPerturbed {
        base,
        spec,
        magnitude,
        shell_mass,
    })
}

impl<O: ScoreOracle> ScoreOracle for ShellPerturbed<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn score_into(&self, x: &[f64], sigma_sq: f64, out: &mut [f64]) -> Result<()> {
        self.base.score_into(x, sigma_sq, out)?;
        if sigma_sq == 0.0 && self.spec.contains(x) {
            for (o, u) in out.iter_mut().zip(&self.spec.u) {
                *o += self.magnitude * u;
            }
        }
        Ok(())
    }

    fn budget(&self) -> ErrorBudget {
        ErrorBudget::ShellPerturbed {
            magnitude: self.magnitude,
            shell_mass: self.shell_mass,
        }
    }
}
