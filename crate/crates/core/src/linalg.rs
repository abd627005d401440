//! Small dense helpers on top of nalgebra. Hot loops work on plain slices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest singular value. Zero for empty matrices.
pub fn operator_norm(a: &Matrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values().max()
}

/// out = a * x
pub fn matvec_into(a: &Matrix, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(a.nrows(), out.len());
    out.iter_mut().for_each(|o| *o = 0.0);
    // Column-major storage: accumulate column by column.
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = a.column(j);
        for (o, &aij) in out.iter_mut().zip(col.iter()) {
            *o += aij * xj;
        }
    }
}

/// out = a^T * x
pub fn matvec_t_into(a: &Matrix, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.nrows(), x.len());
    debug_assert_eq!(a.ncols(), out.len());
    for (j, o) in out.iter_mut().enumerate() {
        *o = a.column(j).iter().zip(x).map(|(aij, xi)| aij * xi).sum();
    }
}

pub fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    matvec_into(a, x, &mut out);
    out
}

pub fn matvec_t(a: &Matrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.ncols()];
    matvec_t_into(a, x, &mut out);
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Symmetric eigendecomposition; eigenvalues are returned in ascending order.
pub fn sym_eigen(m: &Matrix) -> (Vector, Matrix) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    sym_eigen(m).0.min()
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    sym_eigen(m).0.max()
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::invalid("matrix is not symmetric positive definite"))?;
    Ok(chol.inverse())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn spd_cholesky(m: &Matrix) -> Result<Matrix> {
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::invalid("matrix is not symmetric positive definite"))?;
    Ok(chol.l())
}

pub fn log_det_spd(m: &Matrix) -> Result<f64> {
    let l = spd_cholesky(m)?;
    Ok(2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
