//! Sparse coding with graph smoothness.
//!
//! For one task the coding subproblem is
//!
//! ```text
//! min_C |X - C D_k|^2 + lambda3 |X Q - C D|^2 + 2 lambda2 tr(C^T L C) + lambda1 |C|_1
//! ```
//!
//! As a function of a single row `c_a` (others fixed) this is the lasso-type
//! problem `c H_a c^T - 2 c . g_a + lambda1 |c|_1` with
//!
//! ```text
//! H_a = D_k D_k^T + lambda3 D D^T + 2 lambda2 s_a I,    s_a = sum_{b != a} W[a,b]
//! g_a = D_k x_a + lambda3 D Q^T x_a + 2 lambda2 sum_{b != a} W[a,b] c_b
//! ```
//!
//! The default solver sweeps rows and solves each row problem exactly with
//! feature-sign search. Rows decouple when `lambda2 = 0` or `n = 1`, in which
//! case a single pass is exact. Otherwise passes repeat until the L1
//! stationarity residual of the whole matrix drops below the tolerance.
//! When a row Hessian is not positive definite (strongly negative affinities)
//! the solver falls back to proximal gradient, which only needs a Lipschitz
//! bound.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Result, WitsError};

use super::{laplacian, smoothing_affinity, CodeSolverKind, Hyperparams, Model};

/// Precomputed pieces of one task's coding subproblem.
#[derive(Debug, Clone)]
pub struct CodeProblem<'a> {
    x: &'a DMatrix<f64>,
    task_dict: &'a DMatrix<f64>,
    shared_dict: &'a DMatrix<f64>,
    projection: &'a DMatrix<f64>,
    affinity: &'a DMatrix<f64>,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    /// `D_k D_k^T + lambda3 D D^T`.
    gram: DMatrix<f64>,
    /// Row `a` is `(D_k x_a + lambda3 D Q^T x_a)^T`.
    linear: DMatrix<f64>,
    /// Off-diagonal affinity row sums.
    degree: Vec<f64>,
    lap: DMatrix<f64>,
}

impl<'a> CodeProblem<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x: &'a DMatrix<f64>,
        task_dict: &'a DMatrix<f64>,
        shared_dict: &'a DMatrix<f64>,
        projection: &'a DMatrix<f64>,
        affinity: &'a DMatrix<f64>,
        lambda1: f64,
        lambda2: f64,
        lambda3: f64,
    ) -> Result<Self> {
        let (n, m) = x.shape();
        let d = task_dict.nrows();
        if task_dict.ncols() != m {
            return Err(WitsError::invalid(format!(
                "sample dimension {m} does not match dictionary width {}",
                task_dict.ncols()
            )));
        }
        if shared_dict.nrows() != d
            || projection.nrows() != m
            || projection.ncols() != shared_dict.ncols()
        {
            return Err(WitsError::invalid("dictionary/projection shapes are inconsistent"));
        }
        if affinity.shape() != (n, n) {
            return Err(WitsError::invalid(format!("affinity must be {n}x{n}")));
        }
        let gram = task_dict * task_dict.transpose()
            + shared_dict * shared_dict.transpose() * lambda3;
        let linear = x * task_dict.transpose() + (x * projection) * shared_dict.transpose() * lambda3;
        let degree = (0..n)
            .map(|a| affinity.row(a).sum() - affinity[(a, a)])
            .collect();
        Ok(Self {
            x,
            task_dict,
            shared_dict,
            projection,
            affinity,
            lambda1,
            lambda2,
            lambda3,
            gram,
            linear,
            degree,
            lap: laplacian(affinity),
        })
    }

    pub fn from_model(
        x: &'a DMatrix<f64>,
        affinity: &'a DMatrix<f64>,
        model: &'a Model,
        task: usize,
    ) -> Result<Self> {
        let dict = model
            .task_dicts
            .get(task)
            .ok_or_else(|| WitsError::invalid(format!("no task {task} in model")))?;
        let h = &model.hyper;
        Self::new(
            x,
            dict,
            &model.shared_dict,
            &model.projection,
            affinity,
            h.lambda1,
            h.lambda2,
            h.lambda3,
        )
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn atoms(&self) -> usize {
        self.task_dict.nrows()
    }

    /// Full subproblem objective at `c`.
    pub fn objective(&self, c: &DMatrix<f64>) -> f64 {
        let recon = (self.x - c * self.task_dict).norm_squared();
        let shared = (self.x * self.projection - c * self.shared_dict).norm_squared();
        let graph = 2.0 * (&self.lap * c).component_mul(c).sum();
        recon
            + self.lambda3 * shared
            + self.lambda2 * graph
            + self.lambda1 * c.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Gradient of the smooth part at `c`.
    pub fn gradient(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let mut grad = (c * &self.gram - &self.linear) * 2.0;
        if self.lambda2 != 0.0 {
            grad += &self.lap * c * (4.0 * self.lambda2);
        }
        grad
    }

    fn row_hessian(&self, a: usize) -> DMatrix<f64> {
        let d = self.atoms();
        &self.gram + DMatrix::identity(d, d) * (2.0 * self.lambda2 * self.degree[a])
    }

    fn row_linear(&self, a: usize, c: &DMatrix<f64>) -> DVector<f64> {
        let mut g = self.linear.row(a).transpose();
        if self.lambda2 != 0.0 {
            let mut neighbor: RowDVector<f64> = self.affinity.row(a) * c;
            neighbor -= c.row(a) * self.affinity[(a, a)];
            g += neighbor.transpose() * (2.0 * self.lambda2);
        }
        g
    }

    /// Upper bound on the Lipschitz constant of [`Self::gradient`].
    fn lipschitz_bound(&self) -> f64 {
        let gram_norm = self.gram.clone().symmetric_eigen().eigenvalues.amax();
        let lap_norm = self
            .lap
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        2.0 * gram_norm + 4.0 * self.lambda2 * lap_norm
    }

    /// Hessian of the smooth part applied to `v`.
    fn hessian_apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = v * &self.gram * 2.0;
        if self.lambda2 != 0.0 {
            out += &self.lap * v * (4.0 * self.lambda2);
        }
        out
    }

    /// `objective(new) - objective(old)`, computed from the difference so
    /// that it stays accurate when the two points are close.
    pub fn objective_change(&self, new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
        let delta = new - old;
        let sum = new + old;
        let mut quad = (&delta * &self.gram).component_mul(&sum).sum();
        if self.lambda2 != 0.0 {
            quad += 2.0 * self.lambda2 * (&self.lap * &delta).component_mul(&sum).sum();
        }
        let l1 = new.iter().zip(old.iter()).map(|(a, b)| a.abs() - b.abs()).sum::<f64>();
        quad - 2.0 * self.linear.component_mul(&delta).sum() + self.lambda1 * l1
    }
}

/// Largest violation of the L1 optimality conditions at `c`.
///
/// Nonzero entries need `grad + lambda1 sign(c) = 0`; zero entries need
/// `|grad| <= lambda1`.
pub fn stationarity_residual(problem: &CodeProblem<'_>, c: &DMatrix<f64>) -> f64 {
    let grad = problem.gradient(c);
    let l1 = problem.lambda1;
    c.iter()
        .zip(grad.iter())
        .map(|(&v, &g)| {
            if v != 0.0 {
                (g + l1 * v.signum()).abs()
            } else {
                (g.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Solves the coding subproblem for one task.
///
/// `warm` seeds the solver (zeros when absent). On non-convergence the error
/// carries the best iterate, which never has a higher objective than the
/// starting point.
#[allow(clippy::too_many_arguments)]
pub fn update_codes(
    x: &DMatrix<f64>,
    task_dict: &DMatrix<f64>,
    shared_dict: &DMatrix<f64>,
    projection: &DMatrix<f64>,
    affinity: &DMatrix<f64>,
    hyper: &Hyperparams,
    warm: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let problem = CodeProblem::new(
        x,
        task_dict,
        shared_dict,
        projection,
        affinity,
        hyper.lambda1,
        hyper.lambda2,
        hyper.lambda3,
    )?;
    solve(&problem, hyper, warm)
}

pub(crate) fn solve(
    problem: &CodeProblem<'_>,
    hyper: &Hyperparams,
    warm: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let (n, d) = (problem.rows(), problem.atoms());
    let start = match warm {
        Some(w) if w.shape() == (n, d) => w.clone(),
        Some(w) => {
            return Err(WitsError::invalid(format!(
                "warm start is {}x{}, expected {n}x{d}",
                w.nrows(),
                w.ncols()
            )))
        }
        None => DMatrix::zeros(n, d),
    };
    match hyper.code_solver {
        CodeSolverKind::FeatureSign => match row_descent(problem, start.clone(), hyper) {
            Err(RowFailure::NotPositiveDefinite(partial)) => {
                log::debug!("row Hessian indefinite, switching to proximal gradient");
                proximal_gradient(problem, partial, hyper)
            }
            Err(RowFailure::Other(e)) => Err(e),
            Ok(c) => Ok(c),
        },
        CodeSolverKind::ProximalGradient => proximal_gradient(problem, start, hyper),
    }
}

/// Codes new samples against task `task` of a trained model, with the
/// affinity built over the new rows.
pub fn code_for_samples(x: &DMatrix<f64>, task: usize, model: &Model) -> Result<DMatrix<f64>> {
    let affinity = smoothing_affinity(x, model.hyper.signed_affinity);
    let problem = CodeProblem::from_model(x, &affinity, model, task)?;
    solve(&problem, &model.hyper, None)
}

enum RowFailure {
    NotPositiveDefinite(DMatrix<f64>),
    Other(WitsError),
}

fn row_descent(
    problem: &CodeProblem<'_>,
    mut c: DMatrix<f64>,
    hyper: &Hyperparams,
) -> std::result::Result<DMatrix<f64>, RowFailure> {
    let n = problem.rows();
    let mut residual = f64::INFINITY;
    for _pass in 0..hyper.max_code_iters {
        for a in 0..n {
            let h = problem.row_hessian(a);
            let g = problem.row_linear(a, &c);
            let old = c.row(a).transpose();
            let new = match feature_sign(&h, &g, problem.lambda1, &old) {
                Some(v) => v,
                None => return Err(RowFailure::NotPositiveDefinite(c)),
            };
            if row_change(&h, &g, problem.lambda1, &new, &old) <= 0.0 {
                c.set_row(a, &new.transpose());
            }
        }
        residual = stationarity_residual(problem, &c);
        if residual <= hyper.code_tol {
            return Ok(c);
        }
        if !residual.is_finite() {
            break;
        }
        if problem.lambda2 != 0.0 && n > 1 {
            if let Some(polished) = polish(problem, &c, hyper.code_tol) {
                c = polished;
                residual = stationarity_residual(problem, &c);
                if residual <= hyper.code_tol {
                    return Ok(c);
                }
            }
        }
    }
    Err(RowFailure::Other(WitsError::NonConvergence {
        iterations: hyper.max_code_iters,
        residual,
        best: Box::new(c),
    }))
}

fn row_objective(h: &DMatrix<f64>, g: &DVector<f64>, gamma: f64, x: &DVector<f64>) -> f64 {
    (h * x).dot(x) - 2.0 * g.dot(x) + gamma * x.lp_norm(1)
}

/// `row_objective(new) - row_objective(old)` without cancellation.
fn row_change(h: &DMatrix<f64>, g: &DVector<f64>, gamma: f64, new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    let delta = new - old;
    let sum = new + old;
    (h * &delta).dot(&sum) - 2.0 * g.dot(&delta) + gamma * (new.lp_norm(1) - old.lp_norm(1))
}

/// Joint refinement of all nonzero entries with their signs held fixed.
///
/// Conjugate gradient solves the sign-fixed quadratic over the active
/// entries; a line search over the sign-change points between `c` and that
/// solution then picks the best point. Returns `None` when the restricted
/// Hessian is not positive definite or nothing improves.
fn polish(problem: &CodeProblem<'_>, c: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let mask = c.map(|v| if v != 0.0 { 1.0 } else { 0.0 });
    let active = mask.sum() as usize;
    if active == 0 {
        return None;
    }
    let signs = c.map(f64::signum).component_mul(&mask);
    let grad = problem.gradient(c);
    let mut r = -(grad.clone() + &signs * problem.lambda1).component_mul(&mask);
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    let mut x = c.clone();
    let target_res = 1e-3 * tol;
    for _ in 0..(2 * active + 10) {
        if r.amax() <= target_res {
            break;
        }
        let hp = problem.hessian_apply(&p).component_mul(&mask);
        let curv = p.dot(&hp);
        if !(curv > 0.0) {
            return None;
        }
        let alpha = rs / curv;
        x += &p * alpha;
        r -= hp * alpha;
        let rs_next = r.norm_squared();
        p = &r + &p * (rs_next / rs);
        rs = rs_next;
    }

    // phi(t) - phi(0) along c + t * delta, evaluated in closed form.
    let delta = &x - c;
    let slope = grad.dot(&delta);
    let curvature = problem.hessian_apply(&delta).dot(&delta);
    let l1_base: f64 = c.iter().map(|v| v.abs()).sum();
    let change = |point: &DMatrix<f64>, t: f64| {
        let l1: f64 = point.iter().map(|v| v.abs()).sum();
        t * slope + 0.5 * t * t * curvature + problem.lambda1 * (l1 - l1_base)
    };

    let mut best = x.clone();
    let mut best_change = change(&x, 1.0);
    for (i, (&from, &to)) in c.iter().zip(x.iter()).enumerate() {
        if from != 0.0 && from.signum() != to.signum() {
            let t = from / (from - to);
            let mut point = c + &delta * t;
            point[i] = 0.0;
            let v = change(&point, t);
            if v < best_change {
                best_change = v;
                best = point;
            }
        }
    }
    (best_change <= 0.0 && best_change.is_finite()).then_some(best)
}

/// Feature-sign search for `min_x x^T H x - 2 g^T x + gamma |x|_1`, started
/// from `x0`. Returns `None` when an active-set Hessian is not positive
/// definite.
pub(crate) fn feature_sign(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    gamma: f64,
    x0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let d = g.len();
    let scale = (2.0 * g.amax()).max(gamma).max(2.0 * h.amax()).max(1.0);
    let tol = 1e-12 * scale;
    let max_steps = 50 * d + 100;
    let f = |x: &DVector<f64>| row_objective(h, g, gamma, x);

    let mut x = x0.clone();
    let mut steps = 0;
    loop {
        // Optimize over the current nonzero set until its conditions hold.
        loop {
            let grad = (h * &x - g) * 2.0;
            let active: Vec<usize> = (0..d).filter(|&i| x[i] != 0.0).collect();
            if active.is_empty()
                || active
                    .iter()
                    .all(|&i| (grad[i] + gamma * x[i].signum()).abs() <= tol)
            {
                break;
            }
            let signs: Vec<f64> = active.iter().map(|&i| x[i].signum()).collect();
            steps += 1;
            match feature_sign_step(h, g, gamma, &x, &active, &signs, &f)? {
                Some(next) => x = next,
                None => return Some(x),
            }
            if steps > max_steps {
                return Some(x);
            }
        }

        // Activate the zero coefficient with the most violated condition.
        let grad = (h * &x - g) * 2.0;
        let candidate = (0..d)
            .filter(|&i| x[i] == 0.0)
            .max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs()));
        let Some(i) = candidate else {
            return Some(x);
        };
        if grad[i].abs() <= gamma + tol {
            return Some(x);
        }
        let mut active: Vec<usize> = (0..d).filter(|&j| x[j] != 0.0).collect();
        let mut signs: Vec<f64> = active.iter().map(|&j| x[j].signum()).collect();
        active.push(i);
        signs.push(-grad[i].signum());
        steps += 1;
        match feature_sign_step(h, g, gamma, &x, &active, &signs, &f)? {
            Some(next) => x = next,
            None => return Some(x),
        }
        if steps > max_steps {
            return Some(x);
        }
    }
}

/// One feature-sign step: solve the sign-fixed quadratic on the active set and
/// line search over the sign-change points between the current and new
/// solution. Returns `Ok(None)` when no candidate improves the objective.
fn feature_sign_step(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    gamma: f64,
    x: &DVector<f64>,
    active: &[usize],
    signs: &[f64],
    f: &dyn Fn(&DVector<f64>) -> f64,
) -> Option<Option<DVector<f64>>> {
    let k = active.len();
    let h_aa = DMatrix::from_fn(k, k, |i, j| h[(active[i], active[j])]);
    let rhs = DVector::from_fn(k, |i, _| g[active[i]] - 0.5 * gamma * signs[i]);
    let solved = h_aa.cholesky()?.solve(&rhs);

    let mut target = DVector::zeros(x.len());
    for (i, &idx) in active.iter().enumerate() {
        target[idx] = solved[i];
    }

    let mut best = target.clone();
    let mut best_val = f(&target);
    for &idx in active {
        let (from, to) = (x[idx], target[idx]);
        if from != 0.0 && from.signum() != to.signum() {
            let t = from / (from - to);
            let mut p = x + (&target - x) * t;
            p[idx] = 0.0;
            let v = f(&p);
            if v < best_val {
                best_val = v;
                best = p;
            }
        }
    }
    if !best_val.is_finite() || row_change(h, g, gamma, &best, x) > 0.0 || best == *x {
        return Some(None);
    }
    Some(Some(best))
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// FISTA with a monotone restart.
fn proximal_gradient(
    problem: &CodeProblem<'_>,
    start: DMatrix<f64>,
    hyper: &Hyperparams,
) -> Result<DMatrix<f64>> {
    let lip = problem.lipschitz_bound().max(f64::MIN_POSITIVE);
    let step = 1.0 / lip;
    let shrink = step * problem.lambda1;
    let max_iters = hyper.max_code_iters.saturating_mul(50);

    let mut x = start;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut residual = f64::INFINITY;
    for iter in 0..max_iters {
        let grad = problem.gradient(&y);
        let next = (&y - grad * step).map(|v| soft_threshold(v, shrink));
        // A plain step from `x` is monotone with step 1/L; only momentum
        // steps are checked.
        if y != x && problem.objective_change(&next, &x) > 0.0 {
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        t = t_next;
        if iter % 10 == 0 {
            residual = stationarity_residual(problem, &x);
            if residual <= hyper.code_tol {
                return Ok(x);
            }
        }
    }
    residual = residual.min(stationarity_residual(problem, &x));
    if residual <= hyper.code_tol {
        return Ok(x);
    }
    Err(WitsError::NonConvergence {
        iterations: max_iters,
        residual,
        best: Box::new(x),
    })
}
