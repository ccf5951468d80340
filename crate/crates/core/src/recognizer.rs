//! Classification by minimal per-class objective, and abnormality flags.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, RowDVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};
use crate::mtdl::{codes_solve, train, CodeProblem, Hyperparams, Model, TaskDataset};
use crate::scaler::Standardizer;
use crate::signal::{featurize_stream, PipelineOptions, SegmentSpan, SignalStream};

/// Default quantile for [`calibrate_threshold`].
pub const DEFAULT_QUANTILE: f64 = 0.99;

/// Which terms enter the per-class score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Reconstruction, sparsity and shared-subspace terms.
    #[default]
    Full,
    /// Drops the shared term from both coding and scoring.
    NoShared,
    /// Codes with the full objective, scores by reconstruction error alone.
    Residual,
}

impl std::str::FromStr for ScoringMode {
    type Err = WitsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "no_shared" | "no-shared" => Ok(Self::NoShared),
            "residual" => Ok(Self::Residual),
            other => Err(WitsError::invalid(format!("unknown scoring mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityLabel {
    /// 1-based class id.
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub label: ActivityLabel,
    /// One score per class, in model order.
    pub scores: Vec<f64>,
    pub normality: f64,
    pub abnormal: bool,
    pub epsilon: f64,
    /// Fraction of nonzero coefficients in the winning class's code.
    pub support_density: f64,
}

/// Codes one sample against class `task` and returns its score and code.
fn score_class(
    x: &DMatrix<f64>,
    task: usize,
    model: &Model,
    mode: ScoringMode,
) -> Result<(f64, RowDVector<f64>)> {
    let h = &model.hyper;
    let lambda3 = if mode == ScoringMode::NoShared { 0.0 } else { h.lambda3 };
    let affinity = DMatrix::identity(1, 1);
    let problem = CodeProblem::new(
        x,
        &model.task_dicts[task],
        &model.shared_dict,
        &model.projection,
        &affinity,
        h.lambda1,
        0.0,
        lambda3,
    )?;
    let code = match codes_solve(&problem, h, None) {
        Ok(c) => c,
        Err(WitsError::NonConvergence { best, .. }) => *best,
        Err(e) => return Err(e),
    };
    let residual = (x - &code * &model.task_dicts[task]).norm_squared();
    let score = match mode {
        ScoringMode::Residual => residual,
        _ => {
            let shared = if lambda3 == 0.0 {
                0.0
            } else {
                lambda3 * (x * &model.projection - &code * &model.shared_dict).norm_squared()
            };
            residual + h.lambda1 * code.iter().map(|v| v.abs()).sum::<f64>() + shared
        }
    };
    Ok((score, code.row(0).into_owned()))
}

fn prepare(x: &DMatrix<f64>, model: &Model) -> Result<DMatrix<f64>> {
    if x.ncols() != model.dim() {
        return Err(WitsError::invalid(format!(
            "feature dimension {} does not match model dimension {}",
            x.ncols(),
            model.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(WitsError::invalid("features contain non-finite values"));
    }
    match &model.scaler {
        Some(s) => s.transform(x),
        None => Ok(x.clone()),
    }
}

fn classify_prepared(
    x: &DMatrix<f64>,
    model: &Model,
    mode: ScoringMode,
    epsilon: f64,
) -> Result<RecognitionResult> {
    let mut scores = Vec::with_capacity(model.num_tasks());
    let mut best: Option<(usize, RowDVector<f64>)> = None;
    for k in 0..model.num_tasks() {
        let (score, code) = score_class(x, k, model, mode)?;
        // Strict comparison keeps the smallest index on ties.
        if best.as_ref().is_none_or(|(b, _)| score < scores[*b]) {
            best = Some((k, code));
        }
        scores.push(score);
    }
    let (k, code) = best.expect("model has at least one task");
    let normality = scores[k];
    let support_density = code.iter().filter(|v| **v != 0.0).count() as f64 / code.len() as f64;
    Ok(RecognitionResult {
        label: ActivityLabel {
            id: k + 1,
            name: model.labels[k].clone(),
        },
        scores,
        normality,
        abnormal: normality > epsilon,
        epsilon,
        support_density,
    })
}

/// Classifies every row of `x` (raw features; the model's scaler is applied).
pub fn classify(
    x: &DMatrix<f64>,
    model: &Model,
    mode: ScoringMode,
    epsilon: f64,
) -> Result<Vec<RecognitionResult>> {
    let x = prepare(x, model)?;
    (0..x.nrows())
        .into_par_iter()
        .map(|i| classify_prepared(&x.rows(i, 1).into_owned(), model, mode, epsilon))
        .collect()
}

/// Filters, segments, featurizes and classifies a raw stream.
pub fn recognize_stream(
    stream: &SignalStream,
    opts: &PipelineOptions,
    model: &Model,
    mode: ScoringMode,
    epsilon: f64,
) -> Result<(Vec<SegmentSpan>, Vec<RecognitionResult>)> {
    let (features, spans) = featurize_stream(stream, opts)?;
    if spans.is_empty() {
        return Ok((spans, Vec::new()));
    }
    let results = classify(&features.data, model, mode, epsilon)?;
    Ok((spans, results))
}

/// The objective restricted to one sample and class `task` (0-based).
pub fn score_normality(x: &RowDVector<f64>, task: usize, model: &Model, mode: ScoringMode) -> Result<f64> {
    if task >= model.num_tasks() {
        return Err(WitsError::invalid(format!("no class with index {task}")));
    }
    let x = prepare(&DMatrix::from_row_slice(1, x.len(), x.as_slice()), model)?;
    score_class(&x, task, model, mode).map(|(s, _)| s)
}

/// Classifies `x` and compares its normality score to `epsilon`.
pub fn detect_abnormal(x: &RowDVector<f64>, model: &Model, epsilon: f64, mode: ScoringMode) -> Result<bool> {
    let x = DMatrix::from_row_slice(1, x.len(), x.as_slice());
    Ok(classify(&x, model, mode, epsilon)?[0].abnormal)
}

/// Standardizes `x`, groups its rows into one task per class (in `classes`
/// order) and trains. The returned model carries the labels and the scaler.
pub fn fit_model(x: &DMatrix<f64>, labels: &[String], classes: &[String], hyper: &Hyperparams) -> Result<Model> {
    if labels.len() != x.nrows() {
        return Err(WitsError::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            x.nrows()
        )));
    }
    if let Some(l) = labels.iter().find(|l| !classes.contains(l)) {
        return Err(WitsError::invalid(format!("label {l:?} is not a listed class")));
    }
    let scaler = Standardizer::fit(x)?;
    let z = scaler.transform(x)?;
    let tasks = classes
        .iter()
        .map(|c| {
            let rows: Vec<_> = (0..z.nrows()).filter(|&i| &labels[i] == c).map(|i| z.row(i)).collect();
            if rows.is_empty() {
                return Err(WitsError::invalid(format!("class {c:?} has no training rows")));
            }
            Ok(DMatrix::from_rows(&rows))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut model, _) = train(&TaskDataset::new(tasks)?, hyper)?;
    model.labels = classes.to_vec();
    model.scaler = Some(scaler);
    Ok(model)
}

/// Out-of-fold normality scores for the training rows. Rows of each class
/// are dealt round-robin into `folds` folds; every fold is scored by a model
/// fitted on the others, so the scores carry no in-sample optimism.
pub fn cross_fit_scores(
    x: &DMatrix<f64>,
    labels: &[String],
    classes: &[String],
    hyper: &Hyperparams,
    folds: usize,
    mode: ScoringMode,
) -> Result<Vec<f64>> {
    if folds < 2 {
        return Err(WitsError::invalid("cross-fitting needs at least two folds"));
    }
    if labels.len() != x.nrows() {
        return Err(WitsError::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            x.nrows()
        )));
    }
    let mut fold_of = vec![0; x.nrows()];
    let mut seen = vec![0usize; classes.len()];
    for (i, l) in labels.iter().enumerate() {
        let k = classes
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| WitsError::invalid(format!("label {l:?} is not a listed class")))?;
        fold_of[i] = seen[k] % folds;
        seen[k] += 1;
    }
    let mut scores = vec![0.0; x.nrows()];
    for f in 0..folds {
        let (held, kept): (Vec<usize>, Vec<usize>) = (0..x.nrows()).partition(|&i| fold_of[i] == f);
        if held.is_empty() {
            continue;
        }
        let pick = |idx: &[usize]| DMatrix::from_rows(&idx.iter().map(|&i| x.row(i)).collect::<Vec<_>>());
        let kept_labels: Vec<String> = kept.iter().map(|&i| labels[i].clone()).collect();
        let model = fit_model(&pick(&kept), &kept_labels, classes, hyper)?;
        for (r, &i) in classify(&pick(&held), &model, mode, f64::INFINITY)?.iter().zip(&held) {
            scores[i] = r.normality;
        }
    }
    Ok(scores)
}

/// Nearest-rank empirical quantile.
pub fn calibrate_threshold(scores: &[f64], quantile: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(WitsError::invalid("cannot calibrate on an empty score list"));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(WitsError::invalid(format!("quantile {quantile} must be in (0, 1]")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(WitsError::invalid("scores contain NaN"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((quantile * n as f64).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

/// Euclidean k-nearest-neighbor majority vote. Distance ties go to the
/// earlier training row, vote ties to the smallest label.
pub fn knn_baseline(
    train: &DMatrix<f64>,
    labels: &[usize],
    test: &DMatrix<f64>,
    k: usize,
) -> Result<Vec<usize>> {
    let n = train.nrows();
    if n == 0 {
        return Err(WitsError::invalid("training set is empty"));
    }
    if labels.len() != n {
        return Err(WitsError::invalid("one label per training row is required"));
    }
    if k == 0 || k > n {
        return Err(WitsError::invalid(format!("k={k} must be in 1..={n}")));
    }
    if test.ncols() != train.ncols() {
        return Err(WitsError::invalid("train and test dimensions differ"));
    }
    let max_label = *labels.iter().max().expect("nonempty");
    Ok((0..test.nrows())
        .into_par_iter()
        .map(|i| {
            let q = test.row(i);
            let mut dist: Vec<(f64, usize)> = (0..n)
                .map(|j| ((train.row(j) - q).norm_squared(), j))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; max_label + 1];
            for &(_, j) in &dist[..k] {
                votes[labels[j]] += 1;
            }
            let top = *votes.iter().max().expect("nonempty");
            votes.iter().position(|&v| v == top).expect("max exists")
        })
        .collect())
}

/// One line of the classification output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub start_ms: i64,
    pub end_ms: i64,
    pub label: String,
    pub scores: Vec<f64>,
    pub normality: f64,
    pub abnormal: bool,
}

pub fn write_results_jsonl<W: Write>(mut writer: W, records: &[ResultRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_results_jsonl<R: BufRead>(reader: R) -> Result<Vec<ResultRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
