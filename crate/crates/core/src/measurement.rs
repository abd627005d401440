//! Linear Gaussian measurements `y = A x + N(0, eta^2 I_m)` and the coupled
//! observation ladder used by the annealed sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::fill_standard_normal;
use crate::schedule::NoiseLadder;

#[derive(Clone, Debug)]
pub struct MeasurementModel {
    a: Matrix,
    eta: f64,
    op_norm: f64,
}

impl MeasurementModel {
    pub fn new(a: Matrix, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("noise level must be positive, got {eta}")));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurement matrix has non-finite entries"));
        }
        let op_norm = linalg::operator_norm(&a);
        Ok(Self { a, eta, op_norm })
    }

    /// Builds `A` from row-major entries.
    pub fn from_rows(rows: usize, cols: usize, entries: &[f64], eta: f64) -> Result<Self> {
        check_dim("matrix entries", rows * cols, entries.len())?;
        Self::new(Matrix::from_row_slice(rows, cols, entries), eta)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Cached largest singular value of `A`.
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// Number of measurements `m`.
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Signal dimension `d`.
    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Same operator, different noise level.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("noise level must be positive, got {eta}")));
        }
        Ok(Self {
            a: self.a.clone(),
            eta,
            op_norm: self.op_norm,
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("signal", self.cols(), x.len())?;
        Ok(linalg::matvec(&self.a, x))
    }

    /// `A^T (y - A x) / eta^2`, the gradient of the Gaussian log-likelihood in `x`.
    pub fn likelihood_gradient(&self, y: &[f64], x: &[f64], eta: f64) -> Result<Vec<f64>> {
        check_dim("signal", self.cols(), x.len())?;
        check_dim("measurement", self.rows(), y.len())?;
        let mut r = linalg::matvec(&self.a, x);
        let inv = 1.0 / (eta * eta);
        for (ri, yi) in r.iter_mut().zip(y) {
            *ri = (yi - *ri) * inv;
        }
        Ok(linalg::matvec_t(&self.a, &r))
    }
}

/// Draws `y = A x + eta z` with `z ~ N(0, I_m)`.
pub fn simulate_measurement<R: Rng + ?Sized>(
    x: &[f64],
    model: &MeasurementModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !linalg::all_finite(x) {
        return Err(Error::invalid("signal has non-finite entries"));
    }
    let mut y = model.forward(x)?;
    let mut z = vec![0.0; y.len()];
    fill_standard_normal(rng, &mut z);
    for (yi, zi) in y.iter_mut().zip(&z) {
        *yi += model.eta() * zi;
    }
    Ok(y)
}

/// The observations `y_1, ..., y_N` (index 0 is the noisiest) built backward
/// from `y_N = y`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoupledObservations {
    ys: Vec<Vec<f64>>,
    etas: Vec<f64>,
}

impl CoupledObservations {
    pub fn ys(&self) -> &[Vec<f64>] {
        &self.ys
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Observation at zero-based rung `i`.
    pub fn get(&self, i: usize) -> &[f64] {
        &self.ys[i]
    }
}

/// For `i = N-1 .. 1`, `y_i = y_{i+1} + N(0, (eta_i^2 - eta_{i+1}^2) I_m)`.
pub fn build_coupled_ladder<R: Rng + ?Sized>(
    y: &[f64],
    ladder: &NoiseLadder,
    rng: &mut R,
) -> Result<CoupledObservations> {
    let etas = ladder.etas();
    let n = etas.len();
    if n == 0 {
        return Err(Error::invalid("empty noise ladder"));
    }
    check_dim("observation", ladder.params().m, y.len())?;
    let mut ys = vec![Vec::new(); n];
    ys[n - 1] = y.to_vec();
    let mut z = vec![0.0; y.len()];
    for i in (0..n - 1).rev() {
        let var = etas[i] * etas[i] - etas[i + 1] * etas[i + 1];
        if var < 0.0 {
            return Err(Error::invalid(format!(
                "noise ladder increases between rungs {} and {}",
                i + 1,
                i + 2
            )));
        }
        if var == 0.0 {
            ys[i] = ys[i + 1].clone();
            continue;
        }
        fill_standard_normal(rng, &mut z);
        let sd = var.sqrt();
        ys[i] = ys[i + 1].iter().zip(&z).map(|(a, b)| a + sd * b).collect();
    }
    Ok(CoupledObservations {
        ys,
        etas: etas.to_vec(),
    })
}
