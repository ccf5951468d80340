//! Hodrick-Prescott trend/cycle decomposition.
//!
//! The trend `g` minimizes `sum c_t^2 + lambda * sum (second difference of g)^2`
//! with `c = y - g`, which is the linear system `(I + lambda * D2^T D2) g = y`.
//! The system matrix is symmetric positive definite and pentadiagonal, so it is
//! factored with a banded Cholesky in `O(T)`.
//!
//! We solve for the cycle first, `(I + lambda * D2^T D2) c = lambda * D2^T D2 y`,
//! and take `g = y - c`. Both forms are algebraically identical; solving for
//! the cycle keeps `c` exactly zero whenever the second differences of the
//! input vanish in floating point (lines with representable slope, constants).

use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};

/// Growth/cycle split of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendDecomposition {
    pub growth: Vec<f64>,
    pub cyclical: Vec<f64>,
    pub lambda: f64,
}

/// Decomposes `series` into trend and cycle with smoothing parameter `lambda`.
pub fn hp_filter(series: &[f64], lambda: f64) -> Result<TrendDecomposition> {
    let t = series.len();
    if t < 3 {
        return Err(WitsError::invalid(format!(
            "HP filter needs at least 3 samples, got {t}"
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(WitsError::invalid(format!(
            "HP smoothing parameter must be finite and nonnegative, got {lambda}"
        )));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(WitsError::invalid(format!(
            "HP filter input has a non-finite value at index {i}"
        )));
    }

    let rhs = second_difference_normal(series, lambda);
    let factor = BandedCholesky::new(t, lambda)?;
    let cyclical = factor.solve(rhs);
    let growth: Vec<f64> = series
        .iter()
        .zip(&cyclical)
        .map(|(y, c)| y - c)
        .collect();

    Ok(TrendDecomposition {
        growth,
        cyclical,
        lambda,
    })
}

/// `lambda * D2^T (D2 y)`.
fn second_difference_normal(y: &[f64], lambda: f64) -> Vec<f64> {
    let t = y.len();
    let diffs: Vec<f64> = y
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .collect();
    let mut out = vec![0.0; t];
    for (j, s) in diffs.iter().enumerate() {
        out[j] += s;
        out[j + 1] -= 2.0 * s;
        out[j + 2] += s;
    }
    for v in &mut out {
        *v *= lambda;
    }
    out
}

/// Cholesky factor of `I + lambda * D2^T D2`, stored as three bands of `L`.
struct BandedCholesky {
    diag: Vec<f64>,
    sub1: Vec<f64>,
    sub2: Vec<f64>,
}

impl BandedCholesky {
    fn new(t: usize, lambda: f64) -> Result<Self> {
        // Bands of the system matrix: main, first and second super-diagonals.
        let mut b0 = vec![1.0; t];
        let mut b1 = vec![0.0; t];
        let mut b2 = vec![0.0; t];
        for j in 0..t - 2 {
            // Row j of D2 is [1, -2, 1] at columns j, j+1, j+2.
            b0[j] += lambda;
            b0[j + 1] += 4.0 * lambda;
            b0[j + 2] += lambda;
            b1[j] -= 2.0 * lambda;
            b1[j + 1] -= 2.0 * lambda;
            b2[j] += lambda;
        }

        let mut diag = vec![0.0; t];
        let mut sub1 = vec![0.0; t];
        let mut sub2 = vec![0.0; t];
        for i in 0..t {
            let l2 = if i >= 2 { b2[i - 2] / diag[i - 2] } else { 0.0 };
            let l1 = if i >= 1 {
                (b1[i - 1] - l2 * sub1[i - 1]) / diag[i - 1]
            } else {
                0.0
            };
            let pivot = b0[i] - l1 * l1 - l2 * l2;
            if pivot <= 0.0 || !pivot.is_finite() {
                return Err(WitsError::invalid(format!(
                    "HP system lost positive definiteness at row {i} (lambda {lambda})"
                )));
            }
            diag[i] = pivot.sqrt();
            sub1[i] = l1;
            sub2[i] = l2;
        }
        Ok(Self { diag, sub1, sub2 })
    }

    fn solve(&self, mut x: Vec<f64>) -> Vec<f64> {
        let t = x.len();
        for i in 0..t {
            let mut v = x[i];
            if i >= 1 {
                v -= self.sub1[i] * x[i - 1];
            }
            if i >= 2 {
                v -= self.sub2[i] * x[i - 2];
            }
            x[i] = v / self.diag[i];
        }
        for i in (0..t).rev() {
            let mut v = x[i];
            if i + 1 < t {
                v -= self.sub1[i + 1] * x[i + 1];
            }
            if i + 2 < t {
                v -= self.sub2[i + 2] * x[i + 2];
            }
            x[i] = v / self.diag[i];
        }
        x
    }
}

/// Applies `I + lambda * D2^T D2` to `g`.
///
/// This is the exact inverse of the trend map: `hp_filter(apply_hp_operator(g))`
/// returns `g` as its growth component. The synthetic generator uses it to lift
/// a target trend back to a raw series.
pub fn apply_hp_operator(g: &[f64], lambda: f64) -> Vec<f64> {
    if g.len() < 3 {
        return g.to_vec();
    }
    let mut out = second_difference_normal(g, lambda);
    for (o, v) in out.iter_mut().zip(g) {
        *o += v;
    }
    out
}
