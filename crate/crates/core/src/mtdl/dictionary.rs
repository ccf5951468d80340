//! Dictionary updates under unit-ball row constraints.
//!
//! Both dictionary subproblems have the form `min_D |Y - C D|_F^2` subject to
//! `|D[j,:]| <= 1`. With `A = C^T C` and `B = C^T Y` the objective only depends
//! on `(A, B)`, and minimizing over a single row `j` with the others fixed has
//! the closed form `proj( D[j,:] + (B[j,:] - A[j,:] D) / A[j,j] )`, where `proj`
//! rescales onto the unit ball. Cycling over rows until the dictionary stops
//! moving is block coordinate descent on a convex problem and never increases
//! the objective.

use nalgebra::DMatrix;

use super::{SparseCodes, TaskDataset};

const MAX_PASSES: usize = 5_000;
const ROW_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryUpdate {
    pub dictionary: DMatrix<f64>,
    /// Every code column was zero; the dictionary was returned unchanged.
    pub degenerate: bool,
    pub passes: usize,
}

/// Updates `D` against the projected targets `X_k Q` of every task.
pub fn update_shared_dictionary(
    data: &TaskDataset,
    codes: &SparseCodes,
    projection: &DMatrix<f64>,
    current: &DMatrix<f64>,
) -> DictionaryUpdate {
    let d = current.nrows();
    let mut gram = DMatrix::zeros(d, d);
    let mut cross = DMatrix::zeros(d, current.ncols());
    for (x, c) in data.tasks().iter().zip(&codes.codes) {
        gram += c.transpose() * c;
        cross += c.transpose() * (x * projection);
    }
    block_descent(&gram, &cross, current)
}

/// Updates `D_k` against the task's own features.
pub fn update_task_dictionary(
    x: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    current: &DMatrix<f64>,
) -> DictionaryUpdate {
    let gram = codes.transpose() * codes;
    let cross = codes.transpose() * x;
    block_descent(&gram, &cross, current)
}

/// `tr(D^T A D) - 2 tr(D^T B)`, the subproblem objective up to a constant.
pub(crate) fn reduced_objective(gram: &DMatrix<f64>, cross: &DMatrix<f64>, dict: &DMatrix<f64>) -> f64 {
    (gram * dict).component_mul(dict).sum() - 2.0 * cross.component_mul(dict).sum()
}

fn block_descent(gram: &DMatrix<f64>, cross: &DMatrix<f64>, current: &DMatrix<f64>) -> DictionaryUpdate {
    if gram.iter().all(|v| *v == 0.0) {
        log::warn!("dictionary update skipped: all codes are zero");
        return DictionaryUpdate {
            dictionary: current.clone(),
            degenerate: true,
            passes: 0,
        };
    }
    let d = current.nrows();
    let mut dict = current.clone();
    let mut passes = 0;
    while passes < MAX_PASSES {
        passes += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            let ajj = gram[(j, j)];
            if ajj <= 0.0 {
                continue;
            }
            let residual = cross.row(j) - gram.row(j) * &dict;
            let mut row = dict.row(j) + residual / ajj;
            let norm = row.norm();
            if norm > 1.0 {
                row /= norm;
            }
            max_change = max_change.max((&row - dict.row(j)).amax());
            dict.set_row(j, &row);
        }
        if max_change <= ROW_TOL {
            break;
        }
    }

    // Guard against rounding making a converged problem look worse.
    if reduced_objective(gram, cross, &dict) > reduced_objective(gram, cross, current) {
        dict = current.clone();
    }
    DictionaryUpdate {
        dictionary: dict,
        degenerate: false,
        passes,
    }
}
