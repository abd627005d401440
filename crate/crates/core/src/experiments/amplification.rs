//! Shell-supported score error: small in `L^k(N(0, I))`, large with high
//! probability under the narrower Gaussian the chain actually visits.

use serde_json::json;

use super::{cell, Config, ExperimentOutput, Table};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{fill_standard_normal, Purpose, SeedStream};
use crate::scores::ShellPerturbation;

#[derive(Clone, Debug, PartialEq)]
pub struct AmplificationParams {
    pub d: usize,
    pub k: f64,
    pub eps: f64,
    pub rho: f64,
    pub sigma_sq: f64,
    pub draws: usize,
}

impl Default for AmplificationParams {
    fn default() -> Self {
        Self {
            d: 100,
            k: 4.0,
            eps: 0.1,
            rho: 0.3,
            sigma_sq: 6.0 / 11.0,
            draws: 100_000,
        }
    }
}

impl AmplificationParams {
    pub fn from_config(c: &mut Config) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            d: c.usize("d", d.d)?,
            k: c.f64("k", d.k)?,
            eps: c.f64("eps", d.eps)?,
            rho: c.f64("rho", d.rho)?,
            sigma_sq: c.f64("sigma_sq", d.sigma_sq)?,
            draws: c.usize("draws", d.draws)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmplificationResult {
    pub params: AmplificationParams,
    pub shell_mass: f64,
    pub magnitude: f64,
    /// Monte Carlo `E_{N(0, I)} |e|^k`.
    pub moment: f64,
    /// Standard error of `moment` relative to `eps^k`.
    pub moment_rel_stderr: f64,
    /// Monte Carlo `Pr_{N(0, sigma^2 I)}[|e| >= M]`.
    pub narrow_hit_rate: f64,
    /// `1 - 2 exp(-rho^2 d / 8)`.
    pub narrow_hit_bound: f64,
}

impl AmplificationResult {
    pub fn amplification(&self) -> f64 {
        self.magnitude / self.params.eps
    }

    pub fn moment_ok(&self) -> bool {
        self.moment <= self.params.eps.powf(self.params.k) * (1.0 + 3.0 * self.moment_rel_stderr)
    }

    pub fn hit_rate_ok(&self) -> bool {
        self.narrow_hit_rate >= self.narrow_hit_bound
    }

    pub fn output(&self) -> ExperimentOutput {
        let mut t = Table::new(&["quantity", "value"]);
        let rows = [
            ("shell_mass", self.shell_mass),
            ("magnitude", self.magnitude),
            ("amplification", self.amplification()),
            ("moment", self.moment),
            ("moment_target", self.params.eps.powf(self.params.k)),
            ("moment_rel_stderr", self.moment_rel_stderr),
            ("narrow_hit_rate", self.narrow_hit_rate),
            ("narrow_hit_bound", self.narrow_hit_bound),
        ];
        for (k, v) in rows {
            t.push(vec![k.to_string(), cell(v)]);
        }
        ExperimentOutput {
            tables: vec![("amplification.csv".into(), t)],
            summary: json!({
                "amplification": self.amplification(),
                "moment_ok": self.moment_ok(),
                "hit_rate_ok": self.hit_rate_ok(),
            }),
        }
    }
}

pub fn amplification(p: &AmplificationParams, seed: u64) -> Result<AmplificationResult> {
    if p.draws < 2 {
        return Err(Error::invalid("amplification needs at least two draws"));
    }
    let spec = ShellPerturbation::along_first_axis(p.d, p.rho, p.k, p.eps, p.sigma_sq)?;
    let shell_mass = spec.shell_mass();
    if !(shell_mass > 0.0) {
        return Err(Error::invalid("shell has zero mass under the standard Gaussian"));
    }
    let magnitude = spec.magnitude();
    let seeds = SeedStream::new(seed);
    let mut wide = seeds.rng(Purpose::Experiment, 0);
    let mut narrow = seeds.rng(Purpose::Experiment, 1);
    let scale = p.sigma_sq.sqrt();
    let mut x = vec![0.0; p.d];
    let mut e = vec![0.0; p.d];
    let (mut sum, mut sum_sq, mut hits) = (0.0, 0.0, 0usize);
    for _ in 0..p.draws {
        fill_standard_normal(&mut wide, &mut x);
        spec.error_into(&x, magnitude, &mut e);
        let v = linalg::norm(&e).powf(p.k);
        sum += v;
        sum_sq += v * v;

        fill_standard_normal(&mut narrow, &mut x);
        x.iter_mut().for_each(|v| *v *= scale);
        spec.error_into(&x, magnitude, &mut e);
        if linalg::norm(&e) >= magnitude {
            hits += 1;
        }
    }
    let n = p.draws as f64;
    let moment = sum / n;
    let var = (sum_sq / n - moment * moment).max(0.0) * n / (n - 1.0);
    Ok(AmplificationResult {
        params: p.clone(),
        shell_mass,
        magnitude,
        moment,
        moment_rel_stderr: (var / n).sqrt() / p.eps.powf(p.k),
        narrow_hit_rate: hits as f64 / n,
        narrow_hit_bound: 1.0 - 2.0 * (-p.rho * p.rho * p.d as f64 / 8.0).exp(),
    })
}
