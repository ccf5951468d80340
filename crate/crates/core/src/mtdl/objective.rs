use nalgebra::DMatrix;

use crate::error::{Result, WitsError};

use super::{laplacian, Model, SparseCodes, TaskDataset};

/// The four terms of the objective, already weighted by their lambdas.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    pub reconstruction: f64,
    pub sparsity: f64,
    pub smoothness: f64,
    pub shared: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.sparsity + self.smoothness + self.shared
    }
}

pub fn objective(data: &TaskDataset, codes: &SparseCodes, model: &Model) -> Result<f64> {
    objective_terms(data, codes, model).map(|t| t.total())
}

pub fn objective_terms(
    data: &TaskDataset,
    codes: &SparseCodes,
    model: &Model,
) -> Result<ObjectiveTerms> {
    check_shapes(data, codes, model)?;
    let h = &model.hyper;
    let mut terms = ObjectiveTerms::default();
    for (k, x) in data.tasks().iter().enumerate() {
        let c = &codes.codes[k];
        terms.reconstruction += (x - c * &model.task_dicts[k]).norm_squared();
        terms.sparsity += h.lambda1 * c.iter().map(|v| v.abs()).sum::<f64>();
        terms.smoothness += h.lambda2 * graph_term(c, &codes.affinities[k]);
        terms.shared +=
            h.lambda3 * (x * &model.projection - c * &model.shared_dict).norm_squared();
    }
    Ok(terms)
}

/// `sum_{a,b} W[a,b] |C[a,:] - C[b,:]|^2`, computed as `2 tr(C^T L C)`.
pub(crate) fn graph_term(c: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let lc = laplacian(w) * c;
    2.0 * lc.component_mul(c).sum()
}

fn check_shapes(data: &TaskDataset, codes: &SparseCodes, model: &Model) -> Result<()> {
    let k = data.num_tasks();
    if codes.codes.len() != k || codes.affinities.len() != k || model.task_dicts.len() != k {
        return Err(WitsError::invalid(format!(
            "task count mismatch: {k} datasets, {} code matrices, {} affinities, {} dictionaries",
            codes.codes.len(),
            codes.affinities.len(),
            model.task_dicts.len()
        )));
    }
    let d = model.shared_dict.nrows();
    let m = data.dim();
    if model.projection.nrows() != m || model.projection.ncols() != model.shared_dict.ncols() {
        return Err(WitsError::invalid("projection shape does not match data"));
    }
    for (t, x) in data.tasks().iter().enumerate() {
        let n = x.nrows();
        let c = &codes.codes[t];
        let w = &codes.affinities[t];
        let dk = &model.task_dicts[t];
        if c.nrows() != n || c.ncols() != d {
            return Err(WitsError::invalid(format!(
                "codes for task {t} are {}x{}, expected {n}x{d}",
                c.nrows(),
                c.ncols()
            )));
        }
        if w.nrows() != n || w.ncols() != n {
            return Err(WitsError::invalid(format!("affinity for task {t} must be {n}x{n}")));
        }
        if dk.nrows() != d || dk.ncols() != m {
            return Err(WitsError::invalid(format!(
                "dictionary for task {t} must be {d}x{m}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtdl::{build_affinity, Hyperparams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn model_for(rng: &mut ChaCha8Rng, k: usize, d: usize, m: usize, sd: usize) -> Model {
        let q = random(rng, m, sd).qr().q();
        Model {
            shared_dict: random(rng, d, sd),
            task_dicts: (0..k).map(|_| random(rng, d, m)).collect(),
            projection: q,
            hyper: Hyperparams {
                lambda1: 0.3,
                lambda2: 0.2,
                lambda3: 0.7,
                d,
                sd,
                ..Hyperparams::default()
            },
            j_trace: vec![],
            labels: (0..k).map(|i| i.to_string()).collect(),
            scaler: None,
            epsilon: None,
        }
    }

    #[test]
    fn zero_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = TaskDataset::new(vec![random(&mut rng, 5, 6), random(&mut rng, 4, 6)]).unwrap();
        let model = model_for(&mut rng, 2, 3, 6, 2);
        let codes = SparseCodes {
            codes: vec![DMatrix::zeros(5, 3), DMatrix::zeros(4, 3)],
            affinities: data.tasks().iter().map(build_affinity).collect(),
        };
        let expected: f64 = data
            .tasks()
            .iter()
            .map(|x| x.norm_squared() + 0.7 * (x * &model.projection).norm_squared())
            .sum();
        let j = objective(&data, &codes, &model).unwrap();
        assert!((j - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn exact_factorization_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = model_for(&mut rng, 1, 3, 5, 2);
        model.hyper.lambda1 = 0.0;
        model.hyper.lambda2 = 0.0;
        let c = random(&mut rng, 4, 3);
        let x = &c * &model.task_dicts[0];
        // Make X Q = C D hold exactly by construction of D.
        model.shared_dict = model.task_dicts[0].clone() * &model.projection;
        let data = TaskDataset::new(vec![x]).unwrap();
        let codes = SparseCodes {
            codes: vec![c],
            affinities: data.tasks().iter().map(build_affinity).collect(),
        };
        let j = objective(&data, &codes, &model).unwrap();
        assert!(j.abs() < 1e-24, "{j}");
    }

    #[test]
    fn laplacian_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random(&mut rng, 9, 5);
            let c = random(&mut rng, 9, 4);
            let w = build_affinity(&x);
            let mut direct = 0.0;
            for a in 0..9 {
                for b in 0..9 {
                    let diff = c.row(a) - c.row(b);
                    direct += w[(a, b)] * diff.norm_squared();
                }
            }
            let via_l = graph_term(&c, &w);
            assert!((via_l - direct).abs() <= 1e-9 * direct.abs().max(1e-300));
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = TaskDataset::new(vec![random(&mut rng, 5, 6)]).unwrap();
        let model = model_for(&mut rng, 1, 3, 6, 2);
        let codes = SparseCodes {
            codes: vec![DMatrix::zeros(4, 3)],
            affinities: vec![DMatrix::identity(5, 5)],
        };
        assert!(objective(&data, &codes, &model).is_err());
    }
}
