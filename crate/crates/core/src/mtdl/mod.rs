//! Multi-task shared-structure dictionary learning.
//!
//! Each task `k` (an activity class) owns a feature matrix `X_k` (`n_k x m`),
//! sparse codes `C_k` (`n_k x d`) and a dictionary `D_k` (`d x m`). All tasks
//! share an orthonormal projection `Q` (`m x sd`) and a dictionary `D`
//! (`d x sd`) living in the projected space. The learning objective is
//!
//! ```text
//! J = sum_k |X_k - C_k D_k|_F^2
//!   + lambda1 sum_k |C_k|_1
//!   + lambda2 sum_k sum_{a,b} W_k[a,b] |C_k[a,:] - C_k[b,:]|^2
//!   + lambda3 sum_k |X_k Q - C_k D|_F^2
//! ```
//!
//! with every dictionary row constrained to the unit ball and `Q^T Q = I`.
//! Training alternates exact or monotone block updates of `C_k`, `D_k`, `D`
//! and `Q`.

mod affinity;
mod codes;
mod dictionary;
mod objective;
mod projection;
mod train;

pub use affinity::{build_affinity, laplacian, smoothing_affinity};
pub use codes::{code_for_samples, stationarity_residual, update_codes, CodeProblem};
pub(crate) use codes::solve as codes_solve;
pub use dictionary::{
    update_shared_dictionary, update_task_dictionary, DictionaryUpdate,
};
pub use objective::{objective, objective_terms, ObjectiveTerms};
pub use projection::{projection_matrix, update_projection};
pub use train::{train, Trainer};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};
use crate::scaler::Standardizer;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Training matrices, one per task. Every task shares the column count `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    tasks: Vec<DMatrix<f64>>,
    m: usize,
}

impl TaskDataset {
    pub fn new(tasks: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = tasks
            .first()
            .ok_or_else(|| WitsError::invalid("dataset needs at least one task"))?;
        let m = first.ncols();
        if m == 0 {
            return Err(WitsError::invalid("feature dimension must be positive"));
        }
        for (k, x) in tasks.iter().enumerate() {
            if x.ncols() != m {
                return Err(WitsError::invalid(format!(
                    "task {k} has {} columns, expected {m}",
                    x.ncols()
                )));
            }
            if x.nrows() == 0 {
                return Err(WitsError::invalid(format!("task {k} has no samples")));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(WitsError::invalid(format!("task {k} has non-finite values")));
            }
        }
        Ok(Self { tasks, m })
    }

    pub fn tasks(&self) -> &[DMatrix<f64>] {
        &self.tasks
    }

    pub fn task(&self, k: usize) -> &DMatrix<f64> {
        &self.tasks[k]
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn dim(&self) -> usize {
        self.m
    }
}

/// How sparse codes are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeSolverKind {
    /// Row-wise block coordinate descent, each row solved exactly by
    /// feature-sign search.
    #[default]
    FeatureSign,
    /// Proximal gradient over the whole code matrix.
    ProximalGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Atoms per dictionary (also the code width).
    pub d: usize,
    /// Dimension of the shared subspace.
    pub sd: usize,
    pub max_sweeps: usize,
    #[serde(rename = "tol_rel_J")]
    pub tol_rel_j: f64,
    pub code_tol: f64,
    pub seed: u64,
    /// Cap on coding passes before reporting non-convergence.
    pub max_code_iters: usize,
    pub code_solver: CodeSolverKind,
    /// Keep negative cosine affinities in the smoothness term. Off by
    /// default: negative weights can make the objective unbounded below.
    pub signed_affinity: bool,
    /// Experimental: rebuild each affinity matrix from the current codes
    /// after every coding step instead of keeping the data affinity fixed.
    /// Objective monotonicity is not guaranteed in this mode.
    pub affinity_from_codes: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.01,
            lambda3: 1.0,
            d: 20,
            sd: 5,
            max_sweeps: 50,
            tol_rel_j: 1e-5,
            code_tol: 1e-6,
            seed: 0,
            max_code_iters: 500,
            code_solver: CodeSolverKind::FeatureSign,
            signed_affinity: false,
            affinity_from_codes: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self, m: usize) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(WitsError::invalid(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.d == 0 || self.d > m {
            return Err(WitsError::invalid(format!(
                "atom count d={} must be in 1..={m}",
                self.d
            )));
        }
        if self.sd == 0 || self.sd >= m {
            return Err(WitsError::invalid(format!(
                "shared dimension sd={} must be in 1..{m}",
                self.sd
            )));
        }
        if !(self.tol_rel_j > 0.0) || !(self.code_tol > 0.0) {
            return Err(WitsError::invalid("tolerances must be positive"));
        }
        if self.max_code_iters == 0 {
            return Err(WitsError::invalid("max_code_iters must be positive"));
        }
        Ok(())
    }
}

/// Learned dictionaries and projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// Shared dictionary `D`, `d x sd`.
    pub shared_dict: DMatrix<f64>,
    /// Per-task dictionaries `D_k`, each `d x m`.
    pub task_dicts: Vec<DMatrix<f64>>,
    /// Projection `Q`, `m x sd`, orthonormal columns.
    pub projection: DMatrix<f64>,
    pub hyper: Hyperparams,
    /// Objective after initialization and after every sweep.
    pub j_trace: Vec<f64>,
    /// Class names, one per task.
    pub labels: Vec<String>,
    /// Feature standardization applied before coding, if any.
    pub scaler: Option<Standardizer>,
    /// Abnormality threshold calibrated at training time, if any.
    pub epsilon: Option<f64>,
}

/// Sparse codes and the affinity matrices used by the smoothness term.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes {
    pub codes: Vec<DMatrix<f64>>,
    pub affinities: Vec<DMatrix<f64>>,
}

impl Model {
    pub fn num_tasks(&self) -> usize {
        self.task_dicts.len()
    }

    pub fn dim(&self) -> usize {
        self.projection.nrows()
    }

    /// `|Q^T Q - I|_F`.
    pub fn orthonormality_error(&self) -> f64 {
        let sd = self.projection.ncols();
        (self.projection.transpose() * &self.projection - DMatrix::identity(sd, sd)).norm()
    }

    /// Largest Euclidean row norm over `D` and every `D_k`.
    pub fn max_row_norm(&self) -> f64 {
        std::iter::once(&self.shared_dict)
            .chain(&self.task_dicts)
            .flat_map(|m| m.row_iter().map(|r| r.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    fn check_shapes(&self) -> Result<()> {
        let m = self.projection.nrows();
        let sd = self.projection.ncols();
        let d = self.shared_dict.nrows();
        if self.shared_dict.ncols() != sd {
            return Err(WitsError::invalid("shared dictionary width must equal sd"));
        }
        if self.task_dicts.is_empty() {
            return Err(WitsError::invalid("model has no task dictionaries"));
        }
        for (k, dk) in self.task_dicts.iter().enumerate() {
            if dk.nrows() != d || dk.ncols() != m {
                return Err(WitsError::invalid(format!(
                    "task dictionary {k} is {}x{}, expected {d}x{m}",
                    dk.nrows(),
                    dk.ncols()
                )));
            }
        }
        if self.labels.len() != self.task_dicts.len() {
            return Err(WitsError::invalid("one label per task is required"));
        }
        if let Some(s) = &self.scaler {
            if s.dim() != m {
                return Err(WitsError::invalid("scaler dimension does not match model"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>], ncols_if_empty: usize) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(ncols_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(WitsError::invalid("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// On-disk form of [`Model`]: matrices as row-major nested arrays.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    hyper: Hyperparams,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "D_k")]
    d_k: Vec<Vec<Vec<f64>>>,
    j_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<Standardizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

impl From<&Model> for ModelDoc {
    fn from(m: &Model) -> Self {
        ModelDoc {
            version: MODEL_FORMAT_VERSION,
            hyper: m.hyper.clone(),
            q: to_rows(&m.projection),
            d: to_rows(&m.shared_dict),
            d_k: m.task_dicts.iter().map(to_rows).collect(),
            j_trace: m.j_trace.clone(),
            labels: m.labels.clone(),
            scaler: m.scaler.clone(),
            epsilon: m.epsilon,
        }
    }
}

impl TryFrom<ModelDoc> for Model {
    type Error = WitsError;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(WitsError::invalid(format!(
                "unsupported model version {}",
                doc.version
            )));
        }
        let projection = from_rows(&doc.q, 0)?;
        let shared_dict = from_rows(&doc.d, projection.ncols())?;
        let task_dicts = doc
            .d_k
            .iter()
            .map(|r| from_rows(r, projection.nrows()))
            .collect::<Result<Vec<_>>>()?;
        let labels = if doc.labels.is_empty() {
            (1..=task_dicts.len()).map(|k| k.to_string()).collect()
        } else {
            doc.labels
        };
        let model = Model {
            shared_dict,
            task_dicts,
            projection,
            hyper: doc.hyper,
            j_trace: doc.j_trace,
            labels,
            scaler: doc.scaler,
            epsilon: doc.epsilon,
        };
        model.check_shapes()?;
        Ok(model)
    }
}
