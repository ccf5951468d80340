//! Per-column standardization of feature matrices.

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};

/// Columns whose spread is below this fraction of their magnitude are treated
/// as constant and mapped to zero.
const CONSTANT_COLUMN_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Zero marks a constant column.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(WitsError::invalid("cannot fit a scaler on zero rows"));
        }
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mu = col.sum() / n;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            scale.push(if sd <= CONSTANT_COLUMN_RTOL * mu.abs().max(1.0) {
                0.0
            } else {
                sd
            });
        }
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(WitsError::invalid(format!(
                "scaler expects {} columns, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            self.apply(j, x[(i, j)])
        }))
    }

    pub fn transform_row(&self, x: &RowDVector<f64>) -> Result<RowDVector<f64>> {
        if x.len() != self.dim() {
            return Err(WitsError::invalid(format!(
                "scaler expects {} columns, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(RowDVector::from_fn(x.len(), |_, j| self.apply(j, x[j])))
    }

    fn apply(&self, j: usize, v: f64) -> f64 {
        if self.scale[j] == 0.0 {
            0.0
        } else {
            (v - self.mean[j]) / self.scale[j]
        }
    }
}
