use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, WitsError};

use super::codes::{self, CodeProblem};
use super::dictionary::{update_shared_dictionary, update_task_dictionary};
use super::projection::{extreme_eigenvectors, update_projection};
use super::{objective, smoothing_affinity, Hyperparams, Model, SparseCodes, TaskDataset};

/// Alternating minimization state. Each `step_*` method performs one block
/// update; [`Trainer::sweep`] runs them in the order codes, task
/// dictionaries, shared dictionary, projection.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    data: &'a TaskDataset,
    model: Model,
    codes: SparseCodes,
    sweeps: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a TaskDataset, hyper: Hyperparams) -> Result<Self> {
        let m = data.dim();
        hyper.validate(m)?;
        let (d, sd) = (hyper.d, hyper.sd);
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let shared_dict = random_ball_rows(&mut rng, d, sd);
        let task_dicts = (0..data.num_tasks())
            .map(|_| random_ball_rows(&mut rng, d, m))
            .collect();

        let mut gram = DMatrix::zeros(m, m);
        for x in data.tasks() {
            gram += x.transpose() * x;
        }
        let projection = extreme_eigenvectors(&gram, sd, true);

        let codes = SparseCodes {
            codes: data.tasks().iter().map(|x| DMatrix::zeros(x.nrows(), d)).collect(),
            affinities: data
                .tasks()
                .iter()
                .map(|x| smoothing_affinity(x, hyper.signed_affinity))
                .collect(),
        };
        let mut model = Model {
            shared_dict,
            task_dicts,
            projection,
            hyper,
            j_trace: Vec::new(),
            labels: (1..=data.num_tasks()).map(|k| k.to_string()).collect(),
            scaler: None,
            epsilon: None,
        };
        let j0 = objective(data, &codes, &model)?;
        if !j0.is_finite() {
            return Err(WitsError::Numerical {
                sweep: 0,
                message: "objective at initialization is not finite".into(),
            });
        }
        model.j_trace.push(j0);
        Ok(Self {
            data,
            model,
            codes,
            sweeps: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn codes(&self) -> &SparseCodes {
        &self.codes
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn objective(&self) -> Result<f64> {
        objective(self.data, &self.codes, &self.model)
    }

    /// Re-solves every task's codes, warm-started from the current ones.
    pub fn step_codes(&mut self) -> Result<()> {
        let model = &self.model;
        let data = self.data;
        let codes = &self.codes;
        let updated: Vec<DMatrix<f64>> = (0..data.num_tasks())
            .into_par_iter()
            .map(|k| {
                let problem = CodeProblem::new(
                    data.task(k),
                    &model.task_dicts[k],
                    &model.shared_dict,
                    &model.projection,
                    &codes.affinities[k],
                    model.hyper.lambda1,
                    model.hyper.lambda2,
                    model.hyper.lambda3,
                )?;
                match codes::solve(&problem, &model.hyper, Some(&codes.codes[k])) {
                    Ok(c) => Ok(c),
                    Err(WitsError::NonConvergence { residual, best, .. }) => {
                        log::warn!(
                            "task {k}: coding stopped at residual {residual:.3e}; keeping best iterate"
                        );
                        Ok(*best)
                    }
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        self.codes.codes = updated;
        if self.model.hyper.affinity_from_codes {
            let signed = self.model.hyper.signed_affinity;
            self.codes.affinities = self
                .codes
                .codes
                .iter()
                .map(|c| smoothing_affinity(c, signed))
                .collect();
        }
        Ok(())
    }

    pub fn step_task_dicts(&mut self) {
        let data = self.data;
        let codes = &self.codes;
        self.model.task_dicts = self
            .model
            .task_dicts
            .par_iter()
            .enumerate()
            .map(|(k, dk)| update_task_dictionary(data.task(k), &codes.codes[k], dk).dictionary)
            .collect();
    }

    pub fn step_shared_dict(&mut self) {
        self.model.shared_dict =
            update_shared_dictionary(self.data, &self.codes, &self.model.projection, &self.model.shared_dict)
                .dictionary;
    }

    /// Replaces `Q` with the eigenvector solution and refits `D` to it. The
    /// pair is kept only if the objective does not increase; returns whether
    /// it was accepted.
    pub fn step_projection(&mut self) -> Result<bool> {
        let before = self.objective()?;
        let q = update_projection(self.data, &self.codes, self.model.hyper.sd)?;
        let d = update_shared_dictionary(self.data, &self.codes, &q, &self.model.shared_dict).dictionary;
        let mut candidate = self.model.clone();
        candidate.projection = q;
        candidate.shared_dict = d;
        let after = objective(self.data, &self.codes, &candidate)?;
        if after <= before {
            self.model = candidate;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// One full sweep; returns the objective after it.
    pub fn sweep(&mut self) -> Result<f64> {
        self.sweeps += 1;
        let sweep = self.sweeps;
        self.step_codes().map_err(|e| numerical(sweep, e))?;
        self.step_task_dicts();
        self.step_shared_dict();
        self.step_projection().map_err(|e| numerical(sweep, e))?;
        let j = self.objective()?;
        if !j.is_finite() || self.codes.codes.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(WitsError::Numerical {
                sweep,
                message: "non-finite value after sweep".into(),
            });
        }
        self.model.j_trace.push(j);
        Ok(j)
    }

    /// Sweeps until the relative objective change drops below `tol_rel_J`
    /// or `max_sweeps` is reached.
    pub fn run(mut self) -> Result<(Model, SparseCodes)> {
        while self.sweeps < self.model.hyper.max_sweeps {
            let prev = *self.model.j_trace.last().expect("trace starts non-empty");
            let j = self.sweep()?;
            let rel = (prev - j).abs() / prev.abs().max(f64::MIN_POSITIVE);
            log::debug!("sweep {}: J = {j:.6e} (rel change {rel:.3e})", self.sweeps);
            if rel < self.model.hyper.tol_rel_j {
                break;
            }
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> (Model, SparseCodes) {
        (self.model, self.codes)
    }
}

fn numerical(sweep: usize, e: WitsError) -> WitsError {
    match e {
        WitsError::InvalidInput(message) => WitsError::Numerical { sweep, message },
        other => other,
    }
}

fn random_ball_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    for mut r in m.row_iter_mut() {
        let n = r.norm();
        if n > 1.0 {
            r /= n;
        }
    }
    m
}

pub fn train(data: &TaskDataset, hyper: &Hyperparams) -> Result<(Model, SparseCodes)> {
    Trainer::new(data, hyper.clone())?.run()
}
