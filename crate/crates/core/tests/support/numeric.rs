//! Independent numerical oracles for the HP filter, the coding subproblem
//! and the projection step, plus random problem generators.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wits_core::mtdl::{build_affinity, smoothing_affinity, stationarity_residual, CodeProblem, Hyperparams, TaskDataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// HP growth from the dense normal equations `(I + lambda K^T K) g = y`.
pub fn hp_dense(y: &[f64], lambda: f64) -> Vec<f64> {
    let t = y.len();
    // Entries of K^T K, where K takes second differences, added row by row.
    let mut a = DMatrix::identity(t, t);
    let stencil = [1.0, -2.0, 1.0];
    for i in 0..t - 2 {
        for (p, sp) in stencil.iter().enumerate() {
            for (q, sq) in stencil.iter().enumerate() {
                a[(i + p, i + q)] += lambda * sp * sq;
            }
        }
    }
    let b = nalgebra::DVector::from_column_slice(y);
    a.cholesky().expect("SPD").solve(&b).iter().copied().collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Random series of a random length in `3..=max_len`: trend, seasonality,
/// steps and noise.
pub fn random_series(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<f64> {
    let t = rng.random_range(3..=max_len);
    let slope = rng.random_range(-0.5..0.5);
    let period = rng.random_range(4.0..80.0);
    let amp = rng.random_range(0.0..5.0);
    let level = rng.random_range(-80.0..-20.0);
    let mut step = 0.0;
    (0..t)
        .map(|i| {
            if rng.random_bool(0.01) {
                step += rng.random_range(-10.0..10.0);
            }
            let i = i as f64;
            level + slope * i + amp * (std::f64::consts::TAU * i / period).sin() + step + rng.random_range(-1.0..1.0)
        })
        .collect()
}

/// Random task dataset with `K <= max_k`, `n_k <= max_n`, `m <= max_m`, and
/// hyperparameters feasible for it.
pub fn random_problem(seed: u64, max_k: usize, max_n: usize, max_m: usize) -> (TaskDataset, Hyperparams) {
    let mut r = rng(seed);
    let k = r.random_range(1..=max_k);
    let m = r.random_range(3..=max_m);
    let tasks = (0..k)
        .map(|_| {
            let n = r.random_range(2..=max_n);
            // Low-rank structure plus noise so dictionaries have something to find.
            let rank = r.random_range(1..=m.min(4));
            uniform(&mut r, n, rank) * uniform(&mut r, rank, m) + uniform(&mut r, n, m) * 0.1
        })
        .collect();
    let hyper = Hyperparams {
        lambda1: r.random_range(0.01..0.3),
        lambda2: r.random_range(0.0..0.05),
        lambda3: r.random_range(0.0..1.5),
        d: r.random_range(1..=m),
        sd: r.random_range(1..m),
        max_sweeps: 6,
        seed,
        ..Hyperparams::default()
    };
    (TaskDataset::new(tasks).unwrap(), hyper)
}

/// Pieces of a random coding subproblem, owned so a `CodeProblem` can
/// borrow them.
pub struct CodeInstance {
    pub x: DMatrix<f64>,
    pub task_dict: DMatrix<f64>,
    pub shared_dict: DMatrix<f64>,
    pub projection: DMatrix<f64>,
    pub affinity: DMatrix<f64>,
    pub hyper: Hyperparams,
}

impl CodeInstance {
    pub fn random(seed: u64) -> Self {
        let mut r = rng(seed);
        let n = r.random_range(2..=30);
        let m = r.random_range(3..=16);
        let d = r.random_range(1..=10);
        let sd = r.random_range(1..m);
        let x = uniform(&mut r, n, m);
        let mut task_dict = uniform(&mut r, d, m);
        let mut shared_dict = uniform(&mut r, d, sd);
        for dict in [&mut task_dict, &mut shared_dict] {
            for mut row in dict.row_iter_mut() {
                let norm = row.norm();
                if norm > 1.0 {
                    row /= norm;
                }
            }
        }
        let projection = uniform(&mut r, m, sd).qr().q();
        let signed = r.random_bool(0.2);
        let affinity = if signed {
            build_affinity(&x).map(|v| v.abs())
        } else {
            smoothing_affinity(&x, false)
        };
        let hyper = Hyperparams {
            lambda1: r.random_range(0.005..0.5),
            lambda2: r.random_range(0.0..0.1),
            lambda3: r.random_range(0.0..2.0),
            d,
            sd,
            ..Hyperparams::default()
        };
        Self { x, task_dict, shared_dict, projection, affinity, hyper }
    }

    pub fn problem(&self) -> CodeProblem<'_> {
        CodeProblem::new(
            &self.x,
            &self.task_dict,
            &self.shared_dict,
            &self.projection,
            &self.affinity,
            self.hyper.lambda1,
            self.hyper.lambda2,
            self.hyper.lambda3,
        )
        .unwrap()
    }
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Accelerated proximal gradient with backtracking and monotone restart,
/// run until the stationarity residual is at most `tol`.
pub fn proximal_oracle(p: &CodeProblem<'_>, lambda1: f64, tol: f64) -> DMatrix<f64> {
    let smooth = |c: &DMatrix<f64>| p.objective(c) - lambda1 * c.iter().map(|v| v.abs()).sum::<f64>();
    let mut c = DMatrix::zeros(p.rows(), p.atoms());
    let mut y = c.clone();
    let mut theta = 1.0f64;
    let mut step = 1.0;
    for it in 0..2_000_000 {
        let g = p.gradient(&y);
        let fy = smooth(&y);
        let next = loop {
            let cand = (&y - &g * step).map(|v| soft(v, step * lambda1));
            let d = &cand - &y;
            if smooth(&cand) <= fy + g.dot(&d) + d.norm_squared() / (2.0 * step) + 1e-15 * fy.abs() {
                break cand;
            }
            step *= 0.5;
        };
        if p.objective(&next) > p.objective(&c) {
            if y == c {
                // A plain proximal step no longer descends: converged to rounding.
                break;
            }
            // Restart momentum from the last accepted point.
            y = c.clone();
            theta = 1.0;
            continue;
        }
        let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        y = &next + (&next - &c) * ((theta - 1.0) / theta_next);
        theta = theta_next;
        c = next;
        step *= 1.2;
        if it % 20 == 0 && stationarity_residual(p, &c) <= tol {
            break;
        }
    }
    c
}

/// `M = sum_k X_k^T (I - C_k (C_k^T C_k + eps I)^-1 C_k^T) X_k` by a direct
/// linear solve.
pub fn projection_matrix_oracle(data: &TaskDataset, codes: &[DMatrix<f64>], eps: f64) -> DMatrix<f64> {
    let m = data.dim();
    let mut acc = DMatrix::zeros(m, m);
    for (x, c) in data.tasks().iter().zip(codes) {
        let d = c.ncols();
        let g = c.transpose() * c + DMatrix::identity(d, d) * eps;
        let solved = g.lu().solve(&(c.transpose() * x)).expect("ridge keeps it regular");
        acc += x.transpose() * x - (x.transpose() * c) * solved;
    }
    (&acc + acc.transpose()) * 0.5
}
