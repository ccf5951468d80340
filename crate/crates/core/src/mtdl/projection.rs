use nalgebra::DMatrix;

use crate::error::{Result, WitsError};

use super::{SparseCodes, TaskDataset};

/// Ridge added to `C_k^T C_k` before inversion.
pub(crate) const GRAM_RIDGE: f64 = 1e-8;

/// `M = sum_k X_k^T (I - C_k (C_k^T C_k + eps I)^-1 C_k^T) X_k`.
///
/// `tr(Q^T M Q)` is the projected-space residual left after every task fits
/// its own least-squares dictionary on `X_k Q`.
pub fn projection_matrix(data: &TaskDataset, codes: &SparseCodes) -> Result<DMatrix<f64>> {
    if codes.codes.len() != data.num_tasks() {
        return Err(WitsError::invalid("one code matrix per task is required"));
    }
    let m = data.dim();
    let mut acc = DMatrix::zeros(m, m);
    for (x, c) in data.tasks().iter().zip(&codes.codes) {
        if c.nrows() != x.nrows() {
            return Err(WitsError::invalid("code rows must match sample rows"));
        }
        // Eigendecomposition rather than Cholesky: the Gram matrix can be
        // too ill-conditioned for the ridge to survive rounding.
        let eig = (c.transpose() * c).symmetric_eigen();
        let inv = eig.eigenvalues.map(|l| 1.0 / (l.max(0.0) + GRAM_RIDGE));
        let cross = eig.eigenvectors.transpose() * (c.transpose() * x);
        let solved = DMatrix::from_diagonal(&inv) * &cross;
        acc += x.transpose() * x - cross.transpose() * solved;
    }
    Ok((&acc + acc.transpose()) * 0.5)
}

/// Orthonormal eigenvectors of [`projection_matrix`] for its `sd` smallest
/// eigenvalues, as the columns of an `m x sd` matrix.
pub fn update_projection(data: &TaskDataset, codes: &SparseCodes, sd: usize) -> Result<DMatrix<f64>> {
    let m = data.dim();
    if sd == 0 || sd >= m {
        return Err(WitsError::invalid(format!(
            "shared dimension {sd} must be in 1..{m}"
        )));
    }
    let mat = projection_matrix(data, codes)?;
    Ok(extreme_eigenvectors(&mat, sd, false))
}

/// Eigenvectors of a symmetric matrix for its `count` smallest (or largest)
/// eigenvalues. Each vector's largest-magnitude entry is made positive.
pub(crate) fn extreme_eigenvectors(sym: &DMatrix<f64>, count: usize, largest: bool) -> DMatrix<f64> {
    let eig = sym.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]);
        if largest {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut out = DMatrix::zeros(sym.nrows(), count);
    for (col, &idx) in order.iter().take(count).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| {
            if x.abs() > acc.abs() {
                x
            } else {
                acc
            }
        });
        if pivot < 0.0 {
            v = -v;
        }
        out.set_column(col, &v);
    }
    out
}
