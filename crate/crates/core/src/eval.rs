//! Closed-form Gaussian oracles, divergences, two-sample statistics and
//! concentration bounds.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::measurement::MeasurementModel;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSummary {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl GaussianSummary {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        check_dim("covariance rows", mean.len(), cov.nrows())?;
        check_dim("covariance cols", mean.len(), cov.ncols())?;
        if !linalg::is_symmetric(&cov, 1e-10) {
            return Err(Error::invalid("covariance is not symmetric"));
        }
        if !mean.is_empty() && linalg::min_eigenvalue(&cov) < -1e-10 {
            return Err(Error::invalid("covariance is not positive semidefinite"));
        }
        Ok(Self { mean, cov })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, Matrix::identity(d, d) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Empirical mean and (1/n-normalised) covariance.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let (mean, cov) = sample_moments(samples)?;
        Self::new(mean, cov)
    }
}

/// Sample mean and covariance with divisor `n`, summed in index order.
pub fn sample_moments(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Matrix)> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::invalid("no samples"));
    }
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for s in samples {
        check_dim("sample", d, s.len())?;
        mean.iter_mut().zip(s).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(d, d);
    for s in samples {
        for i in 0..d {
            let di = s[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mean, cov))
}

/// Conjugate update: precision `S^-1 + A^T A / eta^2`,
/// mean `S_post (S^-1 mu + A^T y / eta^2)`.
pub fn gaussian_posterior_closed_form(
    prior: &GaussianSummary,
    model: &MeasurementModel,
    y: &[f64],
) -> Result<GaussianSummary> {
    check_dim("prior", model.cols(), prior.dim())?;
    check_dim("measurement", model.rows(), y.len())?;
    let prior_prec = linalg::spd_inverse(&prior.cov).map_err(|_| Error::invalid("prior covariance is singular"))?;
    let inv = 1.0 / (model.eta() * model.eta());
    let a = model.a();
    let prec = &prior_prec + a.transpose() * a * inv;
    let cov = linalg::symmetrize(&linalg::spd_inverse(&prec)?);
    let rhs = &prior_prec * Vector::from_column_slice(&prior.mean)
        + Vector::from_column_slice(&linalg::matvec_t(a, y)) * inv;
    let mean = (&cov * rhs).iter().copied().collect();
    GaussianSummary::new(mean, cov)
}

/// `chi^2(p || q) = int p^2 / q - 1`; infinite unless `2 S_p^-1 - S_q^-1` is positive definite.
pub fn chi_square_gaussians(p: &GaussianSummary, q: &GaussianSummary) -> Result<f64> {
    check_dim("q", p.dim(), q.dim())?;
    let pp = linalg::spd_inverse(&p.cov)?;
    let qp = linalg::spd_inverse(&q.cov)?;
    let m = linalg::symmetrize(&(&pp * 2.0 - &qp));
    if linalg::min_eigenvalue(&m) <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let a = Vector::from_column_slice(&p.mean);
    let b = Vector::from_column_slice(&q.mean);
    let v = &pp * &a * 2.0 - &qp * &b;
    let minv = linalg::spd_inverse(&m)?;
    let log_int = -0.5 * linalg::log_det_spd(&m)? + 0.5 * v.dot(&(&minv * &v)) - a.dot(&(&pp * &a))
        + 0.5 * b.dot(&(&qp * &b))
        - linalg::log_det_spd(&p.cov)?
        + 0.5 * linalg::log_det_spd(&q.cov)?;
    Ok(log_int.exp_m1().max(0.0))
}

/// `KL(p || q)` for Gaussians.
pub fn kl_gaussians(p: &GaussianSummary, q: &GaussianSummary) -> Result<f64> {
    check_dim("q", p.dim(), q.dim())?;
    let qp = linalg::spd_inverse(&q.cov)?;
    let diff = Vector::from_column_slice(&q.mean) - Vector::from_column_slice(&p.mean);
    let trace = (&qp * &p.cov).trace();
    let quad = diff.dot(&(&qp * &diff));
    let kl = 0.5 * (trace + quad - p.dim() as f64 + linalg::log_det_spd(&q.cov)? - linalg::log_det_spd(&p.cov)?);
    Ok(kl.max(0.0))
}

/// `min(sqrt(KL / 2), sqrt(chi^2) / 2)`, an upper bound on `TV(p, q)`.
pub fn tv_upper_bounds(p: &GaussianSummary, q: &GaussianSummary) -> Result<f64> {
    let pinsker = (kl_gaussians(p, q)? / 2.0).sqrt();
    let chi = 0.5 * chi_square_gaussians(p, q)?.sqrt();
    Ok(pinsker.min(chi))
}

fn pairwise_mean(dist: &[f64], n: usize, rows: &[usize], cols: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in rows {
        let row = &dist[i * n..(i + 1) * n];
        for &j in cols {
            total += row[j];
        }
    }
    total / (rows.len() * cols.len()) as f64
}

fn pooled_distances(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("energy distance needs non-empty samples"));
    }
    let d = a[0].len();
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    for s in &pooled {
        check_dim("sample", d, s.len())?;
    }
    let n = pooled.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v: f64 = pooled[i]
                .iter()
                .zip(pooled[j].iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    Ok((dist, n))
}

fn energy_from(dist: &[f64], n: usize, left: &[usize], right: &[usize]) -> f64 {
    2.0 * pairwise_mean(dist, n, left, right) - pairwise_mean(dist, n, left, left) - pairwise_mean(dist, n, right, right)
}

/// `2 E|X - Y| - E|X - X'| - E|Y - Y'|` with V-statistic averages.
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let (dist, n) = pooled_distances(a, b)?;
    let left: Vec<usize> = (0..a.len()).collect();
    let right: Vec<usize> = (a.len()..n).collect();
    Ok(energy_from(&dist, n, &left, &right))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PermutationTest {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Permutation test of equal laws using the energy distance; the p-value is
/// `(1 + #{perm stat >= observed}) / (1 + permutations)`.
pub fn energy_permutation_test<R: Rng + ?Sized>(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    permutations: usize,
    rng: &mut R,
) -> Result<PermutationTest> {
    let (dist, n) = pooled_distances(a, b)?;
    let mut idx: Vec<usize> = (0..n).collect();
    let observed = energy_from(&dist, n, &idx[..a.len()], &idx[a.len()..]);
    let mut exceed = 0;
    for _ in 0..permutations {
        idx.shuffle(rng);
        let stat = energy_from(&dist, n, &idx[..a.len()], &idx[a.len()..]);
        if stat >= observed {
            exceed += 1;
        }
    }
    Ok(PermutationTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        permutations,
    })
}

/// Chi-square tail thresholds `(m + 2 sqrt(m t) + 2t, m - 2 sqrt(m t))`, each
/// exceeded (resp. undershot) with probability at most `e^-t`.
pub fn laurent_massart_tail(m: usize, t: f64) -> (f64, f64) {
    let m = m as f64;
    let root = 2.0 * (m * t).sqrt();
    (m + root + 2.0 * t, m - root)
}

/// Upper bound on `E exp(alpha |Z|^2 + beta |Z|)` for `Z ~ N(0, I_d)`:
/// `exp(beta^2 / (4 gamma)) (1 - 2(alpha + gamma))^(-d/2)`.
pub fn gaussian_mgf_bound(alpha: f64, beta: f64, gamma: f64, d: usize) -> Result<f64> {
    if !(gamma > 0.0) || !(alpha + gamma < 0.5) {
        return Err(Error::invalid(format!(
            "need gamma > 0 and alpha + gamma < 1/2, got alpha = {alpha}, gamma = {gamma}"
        )));
    }
    Ok((beta * beta / (4.0 * gamma) - 0.5 * d as f64 * (1.0 - 2.0 * (alpha + gamma)).ln()).exp())
}

/// `|A| m2 / (2 eta1)`, a bound on `E_y TV(p(x | y_1), p(x))` when the prior
/// has standard deviation (second-moment root) `m2`.
pub fn mi_tv_bound(model: &MeasurementModel, m2: f64, eta1: f64) -> f64 {
    model.op_norm() * m2 / (2.0 * eta1)
}
