//! Analytic priors: log densities, (smoothed) scores and exact samplers.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{fill_standard_normal, standard_normal};
use crate::scores::ring;
use crate::special::log_sum_exp;

/// Eigen-factored covariance; each smoothing level costs `O(d^2)`.
#[derive(Clone, Debug)]
pub struct GaussianParams {
    mean: Vec<f64>,
    cov: Matrix,
    eigvals: Vec<f64>,
    eigvecs: Matrix,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        check_dim("covariance rows", mean.len(), cov.nrows())?;
        check_dim("covariance cols", mean.len(), cov.ncols())?;
        if !linalg::is_symmetric(&cov, 1e-10) {
            return Err(Error::invalid("covariance is not symmetric"));
        }
        if !linalg::all_finite(&mean) || !linalg::all_finite(cov.as_slice()) {
            return Err(Error::invalid("non-finite Gaussian parameters"));
        }
        let (vals, vecs) = linalg::sym_eigen(&cov);
        if vals.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("covariance is not positive definite"));
        }
        Ok(Self {
            mean,
            cov: linalg::symmetrize(&cov),
            eigvals: vals.iter().copied().collect(),
            eigvecs: vecs,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    /// Coordinates of `v` in the eigenbasis.
    fn project(&self, v: &[f64]) -> Vec<f64> {
        linalg::matvec_t(&self.eigvecs, v)
    }

    fn unproject(&self, c: &[f64]) -> Vec<f64> {
        linalg::matvec(&self.eigvecs, c)
    }
}

#[derive(Clone, Debug)]
pub enum PriorSpec {
    IsotropicGaussian { mean: Vec<f64>, variance: f64 },
    GeneralGaussian(GaussianParams),
    GaussianMixture {
        weights: Vec<f64>,
        centers: Vec<Vec<f64>>,
        variance: f64,
    },
    /// Uniform law on the unit circle convolved with `N(0, width^2 I_2)`.
    Ring { width: f64 },
}

impl PriorSpec {
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if mean.is_empty() || !(variance > 0.0 && variance.is_finite()) || !linalg::all_finite(&mean) {
            return Err(Error::invalid("isotropic Gaussian needs d >= 1 and variance > 0"));
        }
        Ok(PriorSpec::IsotropicGaussian { mean, variance })
    }

    pub fn standard(d: usize) -> Self {
        PriorSpec::IsotropicGaussian {
            mean: vec![0.0; d],
            variance: 1.0,
        }
    }

    pub fn gaussian(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        Ok(PriorSpec::GeneralGaussian(GaussianParams::new(mean, cov)?))
    }

    pub fn mixture(weights: Vec<f64>, centers: Vec<Vec<f64>>, variance: f64) -> Result<Self> {
        if weights.is_empty() || weights.len() != centers.len() {
            return Err(Error::invalid("mixture needs one weight per center"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let d = centers[0].len();
        if d == 0 || centers.iter().any(|c| c.len() != d || !linalg::all_finite(c)) {
            return Err(Error::invalid("mixture centers must share a positive dimension"));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid("mixture component variance must be positive"));
        }
        Ok(PriorSpec::GaussianMixture {
            weights,
            centers,
            variance,
        })
    }

    pub fn ring(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::invalid("ring width must be positive"));
        }
        Ok(PriorSpec::Ring { width })
    }

    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::IsotropicGaussian { mean, .. } => mean.len(),
            PriorSpec::GeneralGaussian(g) => g.mean.len(),
            PriorSpec::GaussianMixture { centers, .. } => centers[0].len(),
            PriorSpec::Ring { .. } => 2,
        }
    }

    /// Global strong log-concavity constant, when the prior has one.
    pub fn strong_log_concavity(&self) -> Option<f64> {
        match self {
            PriorSpec::IsotropicGaussian { variance, .. } => Some(1.0 / variance),
            PriorSpec::GeneralGaussian(g) => Some(1.0 / g.eigvals[g.eigvals.len() - 1]),
            _ => None,
        }
    }

    /// Mean and covariance, for Gaussian variants.
    pub fn gaussian_moments(&self) -> Option<(Vec<f64>, Matrix)> {
        match self {
            PriorSpec::IsotropicGaussian { mean, variance } => {
                Some((mean.clone(), Matrix::identity(mean.len(), mean.len()) * *variance))
            }
            PriorSpec::GeneralGaussian(g) => Some((g.mean.clone(), g.cov.clone())),
            _ => None,
        }
    }

    fn check_smoothing(sigma_sq: f64) -> Result<()> {
        if !(sigma_sq >= 0.0 && sigma_sq.is_finite()) {
            return Err(Error::invalid(format!("smoothing variance must be >= 0, got {sigma_sq}")));
        }
        Ok(())
    }

    /// `log (p * N(0, sigma_sq I))(x)`.
    pub fn log_density(&self, x: &[f64], sigma_sq: f64) -> Result<f64> {
        check_dim("point", self.dim(), x.len())?;
        Self::check_smoothing(sigma_sq)?;
        let d = x.len() as f64;
        Ok(match self {
            PriorSpec::IsotropicGaussian { mean, variance } => {
                let v = variance + sigma_sq;
                let r2: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
                -0.5 * d * (2.0 * PI * v).ln() - 0.5 * r2 / v
            }
            PriorSpec::GeneralGaussian(g) => {
                let diff: Vec<f64> = x.iter().zip(&g.mean).map(|(a, b)| a - b).collect();
                let c = g.project(&diff);
                g.eigvals
                    .iter()
                    .zip(&c)
                    .map(|(&l, &ci)| {
                        let v = l + sigma_sq;
                        -0.5 * (2.0 * PI * v).ln() - 0.5 * ci * ci / v
                    })
                    .sum()
            }
            PriorSpec::GaussianMixture {
                weights,
                centers,
                variance,
            } => {
                let v = variance + sigma_sq;
                let logs = mixture_log_terms(weights, centers, v, x);
                log_sum_exp(&logs) - 0.5 * d * (2.0 * PI * v).ln()
            }
            PriorSpec::Ring { width } => ring::log_density(width * width + sigma_sq, x),
        })
    }

    /// Score of the smoothed prior `p * N(0, sigma_sq I)`, written into `out`.
    pub fn score_into(&self, x: &[f64], sigma_sq: f64, out: &mut [f64]) -> Result<()> {
        check_dim("point", self.dim(), x.len())?;
        check_dim("score buffer", self.dim(), out.len())?;
        Self::check_smoothing(sigma_sq)?;
        match self {
            PriorSpec::IsotropicGaussian { mean, variance } => {
                let v = variance + sigma_sq;
                for ((o, a), b) in out.iter_mut().zip(x).zip(mean) {
                    *o = -(a - b) / v;
                }
            }
            PriorSpec::GeneralGaussian(g) => {
                let diff: Vec<f64> = x.iter().zip(&g.mean).map(|(a, b)| a - b).collect();
                let c: Vec<f64> = g
                    .project(&diff)
                    .iter()
                    .zip(&g.eigvals)
                    .map(|(ci, l)| -ci / (l + sigma_sq))
                    .collect();
                out.copy_from_slice(&g.unproject(&c));
            }
            PriorSpec::GaussianMixture {
                weights,
                centers,
                variance,
            } => {
                let v = variance + sigma_sq;
                let logs = mixture_log_terms(weights, centers, v, x);
                let lse = log_sum_exp(&logs);
                out.iter_mut().for_each(|o| *o = 0.0);
                for (c, l) in centers.iter().zip(&logs) {
                    let r = (l - lse).exp();
                    for ((o, a), b) in out.iter_mut().zip(x).zip(c) {
                        *o -= r * (a - b) / v;
                    }
                }
            }
            PriorSpec::Ring { width } => ring::score_into(width * width + sigma_sq, x, out),
        }
        Ok(())
    }

    pub fn score(&self, x: &[f64], sigma_sq: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, sigma_sq, &mut out)?;
        Ok(out)
    }

    /// Exact draw from `p`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            PriorSpec::IsotropicGaussian { mean, variance } => {
                let sd = variance.sqrt();
                mean.iter().map(|m| m + sd * standard_normal(rng)).collect()
            }
            PriorSpec::GeneralGaussian(g) => {
                let mut z = vec![0.0; g.mean.len()];
                fill_standard_normal(rng, &mut z);
                let c: Vec<f64> = z.iter().zip(&g.eigvals).map(|(zi, l)| zi * l.sqrt()).collect();
                g.unproject(&c).iter().zip(&g.mean).map(|(a, b)| a + b).collect()
            }
            PriorSpec::GaussianMixture {
                weights,
                centers,
                variance,
            } => {
                let j = pick(weights, rng.random::<f64>());
                let sd = variance.sqrt();
                centers[j].iter().map(|c| c + sd * standard_normal(rng)).collect()
            }
            PriorSpec::Ring { width } => {
                let theta = 2.0 * PI * rng.random::<f64>();
                vec![
                    theta.cos() + width * standard_normal(rng),
                    theta.sin() + width * standard_normal(rng),
                ]
            }
        }
    }

    /// Exact draw from `p_{x0}(x) ∝ p(x) N(x0; x, sigma_sq I)`.
    pub fn sample_conditioned<R: Rng + ?Sized>(&self, x0: &[f64], sigma_sq: f64, rng: &mut R) -> Result<Vec<f64>> {
        check_dim("anchor", self.dim(), x0.len())?;
        if !(sigma_sq > 0.0) {
            return Err(Error::invalid("conditioning variance must be positive"));
        }
        if sigma_sq.is_infinite() {
            return Ok(self.sample(rng));
        }
        Ok(match self {
            PriorSpec::IsotropicGaussian { mean, variance } => {
                let prec = 1.0 / variance + 1.0 / sigma_sq;
                let sd = (1.0 / prec).sqrt();
                mean.iter()
                    .zip(x0)
                    .map(|(m, a)| (m / variance + a / sigma_sq) / prec + sd * standard_normal(rng))
                    .collect()
            }
            PriorSpec::GeneralGaussian(g) => {
                let cm = g.project(&g.mean);
                let ca = g.project(x0);
                let c: Vec<f64> = g
                    .eigvals
                    .iter()
                    .zip(cm.iter().zip(&ca))
                    .map(|(l, (m, a))| {
                        let prec = 1.0 / l + 1.0 / sigma_sq;
                        (m / l + a / sigma_sq) / prec + standard_normal(rng) / prec.sqrt()
                    })
                    .collect();
                g.unproject(&c)
            }
            PriorSpec::GaussianMixture {
                weights,
                centers,
                variance,
            } => {
                let logs = mixture_log_terms(weights, centers, variance + sigma_sq, x0);
                let lse = log_sum_exp(&logs);
                let post: Vec<f64> = logs.iter().map(|l| (l - lse).exp()).collect();
                let j = pick(&post, rng.random::<f64>());
                let prec = 1.0 / variance + 1.0 / sigma_sq;
                let sd = (1.0 / prec).sqrt();
                centers[j]
                    .iter()
                    .zip(x0)
                    .map(|(c, a)| (c / variance + a / sigma_sq) / prec + sd * standard_normal(rng))
                    .collect()
            }
            PriorSpec::Ring { width } => ring::sample_conditioned(*width, x0, sigma_sq, rng),
        })
    }

    /// Hessian of `log p` for Gaussian variants.
    pub fn gaussian_log_hessian(&self) -> Option<Matrix> {
        self.gaussian_moments()
            .and_then(|(_, cov)| linalg::spd_inverse(&cov).ok())
            .map(|p| -p)
    }
}

fn mixture_log_terms(weights: &[f64], centers: &[Vec<f64>], v: f64, x: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .zip(centers)
        .map(|(w, c)| {
            let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            w.ln() - 0.5 * r2 / v
        })
        .collect()
}

fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    probs.len() - 1
}

