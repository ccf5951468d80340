//! Synthetic home: planted dictionaries, labeled sensor streams and context
//! event traces.
//!
//! Each segment gets a latent row `x = c R D_k*` plus Gaussian noise, where
//! `c` is a sparse code, `R` a per-span orthogonal mixing of the atoms (the
//! person variation) and `D_k*` the planted dictionary of the segment's
//! class. The row holds two targets per channel: an offset from the
//! channel's base level and an offset from the base dither amplitude. The
//! channel's smoothed signal over the segment is a square wave
//! `level ± amplitude`, so the Mean and StdDev features of that segment equal
//! the two targets. The raw stream is that smoothed signal pushed through the
//! HP operator `I + λ D2ᵀD2`, which the featurizer's filter inverts exactly.

use std::collections::HashMap;

use nalgebra::{DMatrix, RowDVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};
use crate::events::{ContextEvent, EventKind};
use crate::signal::{
    apply_hp_operator, Frame, LabelRecord, SignalStream, DEFAULT_LAMBDA, DEFAULT_SAMPLE_PERIOD_MS,
    DEFAULT_WINDOW_MS,
};

/// Base dither amplitude of every channel.
pub const BASE_AMPLITUDE: f64 = 10.0;
/// Outlier rows carry this many times the noise energy.
pub const OUTLIER_ENERGY_RATIO: f64 = 10.0;
/// Weight of the shared component `D* Q*ᵀ` in each planted task dictionary.
const SHARED_WEIGHT: f64 = 0.3;
/// Code magnitudes are uniform on this range with a random sign.
const CODE_MAGNITUDE: (f64, f64) = (0.5, 1.5);

const HOUR_MS: i64 = 3_600_000;
const MIN_MS: i64 = 60_000;

/// Ground-truth factors: `D*` (`d x sd`), `D_k*` (`d x m`) and `Q*` (`m x sd`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub shared_dict: DMatrix<f64>,
    pub task_dicts: Vec<DMatrix<f64>>,
    pub projection: DMatrix<f64>,
}

impl PlantedModel {
    pub fn num_tasks(&self) -> usize {
        self.task_dicts.len()
    }

    pub fn atoms(&self) -> usize {
        self.shared_dict.nrows()
    }

    pub fn dim(&self) -> usize {
        self.projection.nrows()
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Row-major draw order so the result does not depend on storage layout.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
}

/// Seeded feasible factors: unit-norm dictionary rows and orthonormal `Q*`.
pub fn plant_model(seed: u64, k: usize, d: usize, m: usize, sd: usize) -> Result<PlantedModel> {
    if k == 0 || d == 0 || sd == 0 || sd > m {
        return Err(WitsError::invalid(format!(
            "cannot plant K={k}, d={d}, m={m}, sd={sd}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projection = orthonormalize(gaussian(&mut rng, m, sd));
    let mut shared_dict = gaussian(&mut rng, d, sd);
    normalize_rows(&mut shared_dict);
    let common = &shared_dict * projection.transpose();
    let task_dicts = (0..k)
        .map(|_| {
            let mut dk = gaussian(&mut rng, d, m);
            normalize_rows(&mut dk);
            dk += &common * SHARED_WEIGHT;
            normalize_rows(&mut dk);
            dk
        })
        .collect();
    Ok(PlantedModel {
        shared_dict,
        task_dicts,
        projection,
    })
}

/// Orthonormal basis of the column space (modified Gram-Schmidt, applied
/// twice for accuracy at 1e-15).
fn orthonormalize(mut a: DMatrix<f64>) -> DMatrix<f64> {
    for _ in 0..2 {
        for j in 0..a.ncols() {
            for i in 0..j {
                let proj = a.column(i).dot(&a.column(j));
                let ci = a.column(i).clone_owned();
                a.column_mut(j).axpy(-proj, &ci, 1.0);
            }
            let n = a.column(j).norm();
            a.column_mut(j).unscale_mut(n);
        }
    }
    a
}

/// Nearest orthogonal matrix to `I + strength * G / sqrt(n)`.
fn mixing(rng: &mut ChaCha8Rng, n: usize, strength: f64) -> DMatrix<f64> {
    let g = gaussian(rng, n, n);
    if strength == 0.0 {
        return DMatrix::identity(n, n);
    }
    let a = DMatrix::identity(n, n) + g * (strength / (n as f64).sqrt());
    let svd = a.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    u * vt
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySpan {
    pub label: String,
    pub start_ms: i64,
    pub duration_ms: i64,
    /// `Entity.Attribute` keys that are true for the span's duration.
    #[serde(default)]
    pub context: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioScript {
    pub seed: u64,
    pub activities: Vec<ActivitySpan>,
    /// Class order for the planted dictionaries. Empty means labels in order
    /// of first appearance.
    pub classes: Vec<String>,
    pub residents: usize,
    pub channels: usize,
    pub noise_sigma: f64,
    /// Strength in `[0, 1]` of the per-span orthogonal mixing of atoms.
    pub person_variation: f64,
    pub outlier_rate: f64,
    pub sample_period_ms: i64,
    pub window_ms: i64,
    /// HP smoothing parameter the raw stream is lifted for.
    pub lambda: f64,
    /// Planted atoms per dictionary.
    pub atoms: usize,
    pub shared_dim: usize,
    /// Nonzeros per sparse code, at most `atoms / 4`.
    pub support: usize,
}

impl Default for ScenarioScript {
    fn default() -> Self {
        Self {
            seed: 7,
            activities: default_day(),
            classes: Vec::new(),
            residents: 1,
            channels: 8,
            noise_sigma: 0.03,
            person_variation: 0.3,
            outlier_rate: 0.0,
            sample_period_ms: DEFAULT_SAMPLE_PERIOD_MS,
            window_ms: DEFAULT_WINDOW_MS,
            lambda: DEFAULT_LAMBDA,
            atoms: 8,
            shared_dim: 3,
            support: 2,
        }
    }
}

fn span(label: &str, start_ms: i64, duration_ms: i64, context: &[&str]) -> ActivitySpan {
    ActivitySpan {
        label: label.to_string(),
        start_ms,
        duration_ms,
        context: context.iter().map(|s| s.to_string()).collect(),
    }
}

/// A morning and an evening touching every example rule.
fn default_day() -> Vec<ActivitySpan> {
    let at = |h: i64, m: i64| h * HOUR_MS + m * MIN_MS;
    vec![
        span("Walking", at(6, 30), 10 * MIN_MS, &[]),
        span("Toileting", at(6, 40), 35 * MIN_MS, &["Toilet.Occupied"]),
        span(
            "Standing",
            at(7, 15),
            20 * MIN_MS,
            &["Kitchen.Presence", "Cooktop.ON", "Choptable.Use"],
        ),
        span("Eating", at(7, 35), 20 * MIN_MS, &["Kitchen.Presence"]),
        span("TakingMedicine", at(7, 55), 5 * MIN_MS, &[]),
        span("WatchingTV", at(19, 0), 60 * MIN_MS, &["Couch.Occupied", "TV.ON"]),
        span("Walking", at(20, 30), 10 * MIN_MS, &["Porch.Presence"]),
        span("Falling", at(20, 40), MIN_MS, &[]),
        span("Sleeping", at(22, 0), 60 * MIN_MS, &["Bed.Occupied"]),
    ]
}

impl ScenarioScript {
    pub fn latent_dim(&self) -> usize {
        2 * self.channels
    }

    /// Class names in dictionary order.
    pub fn class_names(&self) -> Vec<String> {
        if !self.classes.is_empty() {
            return self.classes.clone();
        }
        let mut out: Vec<String> = Vec::new();
        for a in &self.activities {
            if !out.contains(&a.label) {
                out.push(a.label.clone());
            }
        }
        out
    }

    pub fn frames_per_window(&self) -> usize {
        (self.window_ms / self.sample_period_ms) as usize
    }

    /// Plants factors matching this script's shape, seeded by `seed`.
    pub fn plant(&self) -> Result<PlantedModel> {
        plant_model(
            self.seed,
            self.class_names().len(),
            self.atoms,
            self.latent_dim(),
            self.shared_dim,
        )
    }

    pub fn validate(&self, planted: &PlantedModel) -> Result<()> {
        let bad = |msg: String| Err(WitsError::invalid(msg));
        if self.residents != 1 {
            return bad(format!("only one resident is supported, got {}", self.residents));
        }
        if self.channels == 0 {
            return bad("at least one channel is required".into());
        }
        if self.sample_period_ms <= 0 || self.window_ms < 2 * self.sample_period_ms {
            return bad("window must span at least two samples".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.person_variation) {
            return bad("person_variation must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return bad("outlier_rate must lie in [0, 1]".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and nonnegative".into());
        }
        if self.support == 0 || 4 * self.support > planted.atoms() {
            return bad(format!(
                "support {} must be between 1 and atoms/4 = {}",
                self.support,
                planted.atoms() / 4
            ));
        }
        if planted.dim() != self.latent_dim() {
            return bad(format!(
                "planted dimension {} does not match 2 x {} channels",
                planted.dim(),
                self.channels
            ));
        }
        let classes = self.class_names();
        if classes.len() != planted.num_tasks() {
            return bad(format!(
                "{} classes but {} planted dictionaries",
                classes.len(),
                planted.num_tasks()
            ));
        }
        let mut sorted: Vec<&ActivitySpan> = self.activities.iter().collect();
        sorted.sort_by_key(|a| a.start_ms);
        for (i, a) in sorted.iter().enumerate() {
            if a.duration_ms <= 0 {
                return bad(format!("activity {:?} has a nonpositive duration", a.label));
            }
            if a.start_ms % self.sample_period_ms != 0 {
                return bad(format!(
                    "activity {:?} does not start on a sample boundary",
                    a.label
                ));
            }
            if !classes.contains(&a.label) {
                return bad(format!("activity {:?} is not a listed class", a.label));
            }
            if let Some(next) = sorted.get(i + 1) {
                if a.start_ms + a.duration_ms > next.start_ms {
                    return bad(format!("activities {:?} and {:?} overlap", a.label, next.label));
                }
            }
            for key in &a.context {
                if split_key(key).is_none() {
                    return bad(format!("context key {key:?} is not Entity.Attribute"));
                }
            }
        }
        Ok(())
    }
}

fn split_key(key: &str) -> Option<(&str, &str)> {
    let (e, a) = key.split_once('.')?;
    (!e.is_empty() && !a.is_empty()).then_some((e, a))
}

fn context_kind(attribute: &str) -> EventKind {
    match attribute {
        "Presence" | "Occupied" => EventKind::Location,
        _ => EventKind::ObjectUse,
    }
}

/// Generator output. `rows` are the latent rows actually planted, one per
/// segment, noise and outlier perturbation included.
#[derive(Debug, Clone)]
pub struct Generated {
    pub stream: SignalStream,
    pub segments: Vec<LabelRecord>,
    pub events: Vec<ContextEvent>,
    pub rows: DMatrix<f64>,
}

pub fn channel_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("tag{i:02}")).collect()
}

/// Base level of channel `c`, in dBm. Levels stay well below zero so the
/// dithered signal never crosses it.
pub fn base_level(c: usize) -> f64 {
    -45.0 - 2.0 * c as f64
}

/// Each span contributes its whole windows only; a trailing partial window is
/// not sampled.
pub fn generate(script: &ScenarioScript, planted: &PlantedModel) -> Result<Generated> {
    script.validate(planted)?;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    rng.set_stream(1);
    let classes = script.class_names();
    let class_index: HashMap<&str, usize> =
        classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut spans: Vec<&ActivitySpan> = script.activities.iter().collect();
    spans.sort_by_key(|a| a.start_ms);

    let per_window = script.frames_per_window();
    let d = planted.atoms();
    let m = planted.dim();
    let outlier_sigma = script.noise_sigma * OUTLIER_ENERGY_RATIO.sqrt();

    let mut rows: Vec<RowDVector<f64>> = Vec::new();
    let mut segments = Vec::new();
    let mut frames = Vec::new();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for a in &spans {
        let k = class_index[a.label.as_str()];
        let mix = mixing(&mut rng, d, script.person_variation);
        let dict = &mix * &planted.task_dicts[k];
        let windows = (a.duration_ms / script.window_ms) as usize;
        let contiguous = frames
            .last()
            .is_some_and(|f: &Frame| f.ts + script.sample_period_ms == a.start_ms);
        if windows > 0 && !contiguous {
            runs.push((frames.len(), 0));
        }
        for w in 0..windows {
            let mut code = RowDVector::zeros(d);
            let mut atoms: Vec<usize> = (0..d).collect();
            atoms.shuffle(&mut rng);
            for &j in &atoms[..script.support] {
                let mag = rng.random_range(CODE_MAGNITUDE.0..CODE_MAGNITUDE.1);
                code[j] = if rng.random_bool(0.5) { mag } else { -mag };
            }
            let outlier = rng.random_bool(script.outlier_rate);
            let sigma = if outlier { outlier_sigma } else { script.noise_sigma };
            let mut x = &code * &dict;
            for v in x.iter_mut() {
                *v += sigma * rng.sample::<f64, _>(StandardNormal);
            }
            let start = a.start_ms + w as i64 * script.window_ms;
            for f in 0..per_window {
                let sign = if f % 2 == 0 { 1.0 } else { -1.0 };
                let values = (0..script.channels)
                    .map(|c| {
                        let level = base_level(c) + x[2 * c];
                        let amplitude = (BASE_AMPLITUDE + x[2 * c + 1]).max(0.0);
                        level + sign * amplitude
                    })
                    .collect();
                frames.push(Frame {
                    ts: start + f as i64 * script.sample_period_ms,
                    values,
                });
            }
            runs.last_mut().expect("run").1 += per_window;
            segments.push(LabelRecord {
                start_ms: start,
                end_ms: start + script.window_ms,
                label: a.label.clone(),
                outlier,
            });
            rows.push(x);
        }
    }

    for &(begin, len) in &runs {
        for c in 0..script.channels {
            let g: Vec<f64> = frames[begin..begin + len].iter().map(|f| f.values[c]).collect();
            for (f, v) in frames[begin..begin + len]
                .iter_mut()
                .zip(apply_hp_operator(&g, script.lambda))
            {
                f.values[c] = v;
            }
        }
    }

    let stream = SignalStream::new(channel_names(script.channels), frames, script.sample_period_ms)?;
    let rows = if rows.is_empty() {
        DMatrix::zeros(0, m)
    } else {
        DMatrix::from_rows(&rows)
    };
    Ok(Generated {
        stream,
        segments,
        events: context_trace(&spans),
        rows,
    })
}

/// Activity and context change events for the script. At equal timestamps,
/// endings come before beginnings.
fn context_trace(spans: &[&ActivitySpan]) -> Vec<ContextEvent> {
    let mut keyed = Vec::new();
    for a in spans {
        let end = a.start_ms + a.duration_ms;
        keyed.push((a.start_ms, 1, ContextEvent::new(a.start_ms, EventKind::Activity, "Activity", a.label.as_str(), true)));
        keyed.push((end, 0, ContextEvent::new(end, EventKind::Activity, "Activity", a.label.as_str(), false)));
        for key in &a.context {
            let (entity, attribute) = split_key(key).expect("validated key");
            let kind = context_kind(attribute);
            keyed.push((a.start_ms, 1, ContextEvent::new(a.start_ms, kind, entity, attribute, true)));
            keyed.push((end, 0, ContextEvent::new(end, kind, entity, attribute, false)));
        }
    }
    keyed.sort_by_key(|(ts, order, _)| (*ts, *order));
    keyed.into_iter().map(|(_, _, e)| e).collect()
}

/// Noise level giving the requested per-entry SNR for codes with `support`
/// nonzeros over unit-norm atoms in `m` dimensions.
pub fn snr_noise_sigma(support: usize, m: usize, snr_db: f64) -> f64 {
    let (lo, hi) = CODE_MAGNITUDE;
    let code_power = (hi.powi(3) - lo.powi(3)) / (3.0 * (hi - lo));
    let signal_power = support as f64 * code_power / m as f64;
    (signal_power / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Shape of the recognition benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub classes: usize,
    pub channels: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub segments_per_span: usize,
    pub person_variation: f64,
    pub snr_db: f64,
    /// Outlier rate of the test split; training data is always clean.
    pub test_outlier_rate: f64,
    pub atoms: usize,
    pub shared_dim: usize,
    pub support: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            seed: 11,
            classes: 5,
            channels: 10,
            train_per_class: 200,
            test_per_class: 100,
            segments_per_span: 5,
            person_variation: 0.3,
            snr_db: 20.0,
            test_outlier_rate: 0.0,
            atoms: 12,
            shared_dim: 3,
            support: 3,
        }
    }
}

/// Activity class names used by the benchmark.
pub const BASIC_ACTIVITIES: [&str; 8] = [
    "Sitting",
    "Standing",
    "Lying",
    "Walking",
    "ArmMovement",
    "Kicking",
    "Crouching",
    "Falling",
];

pub struct Benchmark {
    pub planted: PlantedModel,
    pub train: ScenarioScript,
    pub test: ScenarioScript,
}

/// Planted factors plus train and test scripts sharing them. Spans are
/// back to back in a shuffled class order.
pub fn benchmark(spec: &BenchmarkSpec) -> Result<Benchmark> {
    if spec.classes == 0 || spec.classes > BASIC_ACTIVITIES.len() {
        return Err(WitsError::invalid(format!(
            "benchmark supports 1..={} classes",
            BASIC_ACTIVITIES.len()
        )));
    }
    if spec.segments_per_span == 0 {
        return Err(WitsError::invalid("segments_per_span must be positive"));
    }
    let classes: Vec<String> = BASIC_ACTIVITIES[..spec.classes].iter().map(|s| s.to_string()).collect();
    let m = 2 * spec.channels;
    let planted = plant_model(spec.seed, spec.classes, spec.atoms, m, spec.shared_dim)?;
    let script = |seed: u64, per_class: usize, outlier_rate: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order = Vec::new();
        for (k, _) in classes.iter().enumerate() {
            let mut left = per_class;
            while left > 0 {
                let n = left.min(spec.segments_per_span);
                order.push((k, n));
                left -= n;
            }
        }
        order.shuffle(&mut rng);
        let base = ScenarioScript::default();
        let mut t = 0;
        let activities = order
            .into_iter()
            .map(|(k, n)| {
                let duration = n as i64 * base.window_ms;
                let a = span(&classes[k], t, duration, &[]);
                t += duration;
                a
            })
            .collect();
        ScenarioScript {
            seed,
            activities,
            classes: classes.clone(),
            channels: spec.channels,
            noise_sigma: snr_noise_sigma(spec.support, m, spec.snr_db),
            person_variation: spec.person_variation,
            outlier_rate,
            atoms: spec.atoms,
            shared_dim: spec.shared_dim,
            support: spec.support,
            ..base
        }
    };
    Ok(Benchmark {
        train: script(spec.seed.wrapping_add(1), spec.train_per_class, 0.0),
        test: script(spec.seed.wrapping_add(2), spec.test_per_class, spec.test_outlier_rate),
        planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{featurize_stream, PipelineOptions, Stat, STATS_PER_CHANNEL};

    #[test]
    fn planted_factors_are_feasible_and_seeded() {
        let a = plant_model(3, 4, 8, 12, 3).unwrap();
        assert_eq!(a, plant_model(3, 4, 8, 12, 3).unwrap());
        assert_ne!(a, plant_model(4, 4, 8, 12, 3).unwrap());
        let qtq = a.projection.transpose() * &a.projection;
        assert!((qtq - DMatrix::identity(3, 3)).norm() <= 1e-12);
        for m in std::iter::once(&a.shared_dict).chain(&a.task_dicts) {
            assert!(m.row_iter().all(|r| r.norm() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn featurization_reproduces_planted_rows() {
        let script = ScenarioScript {
            outlier_rate: 0.2,
            ..ScenarioScript::default()
        };
        let planted = script.plant().unwrap();
        let g = generate(&script, &planted).unwrap();
        let (features, spans) = featurize_stream(&g.stream, &PipelineOptions::default()).unwrap();
        assert_eq!(features.nrows(), g.segments.len());
        for (i, (span, seg)) in spans.iter().zip(&g.segments).enumerate() {
            assert_eq!((span.start_ms, span.end_ms), (seg.start_ms, seg.end_ms));
            for c in 0..script.channels {
                let block = c * STATS_PER_CHANNEL;
                let mean = features.data[(i, block + Stat::Mean.offset())];
                let sd = features.data[(i, block + Stat::StdDev.offset())];
                assert!((mean - base_level(c) - g.rows[(i, 2 * c)]).abs() < 1e-6);
                assert!((sd - BASE_AMPLITUDE - g.rows[(i, 2 * c + 1)]).abs() < 1e-6);
            }
        }
        assert!(g.segments.iter().any(|s| s.outlier));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let script = ScenarioScript::default();
        let planted = script.plant().unwrap();
        let a = generate(&script, &planted).unwrap();
        let b = generate(&script, &planted).unwrap();
        assert_eq!(a.stream, b.stream);
        assert_eq!(a.segments, b.segments);
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn segments_follow_the_script() {
        let script = ScenarioScript::default();
        let planted = script.plant().unwrap();
        let g = generate(&script, &planted).unwrap();
        let expected: usize = script
            .activities
            .iter()
            .map(|a| (a.duration_ms / script.window_ms) as usize)
            .sum();
        assert_eq!(g.segments.len(), expected);
        for s in &g.segments {
            let a = script
                .activities
                .iter()
                .find(|a| a.start_ms <= s.start_ms && s.end_ms <= a.start_ms + a.duration_ms)
                .expect("segment inside a span");
            assert_eq!(a.label, s.label);
        }
        assert!(g.events.windows(2).all(|w| w[0].ts <= w[1].ts));
    }

    #[test]
    fn infeasible_scripts_are_rejected() {
        let base = ScenarioScript::default();
        let planted = base.plant().unwrap();
        let overlapping = ScenarioScript {
            activities: vec![span("Walking", 0, 20_000, &[]), span("Walking", 10_000, 20_000, &[])],
            classes: base.class_names(),
            ..base.clone()
        };
        assert!(generate(&overlapping, &planted).is_err());
        let too_dense = ScenarioScript {
            support: 3,
            ..base.clone()
        };
        assert!(generate(&too_dense, &planted).is_err());
        let zero = ScenarioScript {
            activities: vec![span("Walking", 0, 0, &[])],
            classes: base.class_names(),
            ..base
        };
        assert!(generate(&zero, &planted).is_err());
    }

    #[test]
    fn snr_matches_empirical_power() {
        let spec = BenchmarkSpec {
            person_variation: 0.0,
            ..BenchmarkSpec::default()
        };
        let b = benchmark(&spec).unwrap();
        let clean = ScenarioScript {
            noise_sigma: 0.0,
            ..b.train.clone()
        };
        let g = generate(&clean, &b.planted).unwrap();
        let power = g.rows.norm_squared() / g.rows.len() as f64;
        let sigma = b.train.noise_sigma;
        let snr = 10.0 * (power / (sigma * sigma)).log10();
        assert!((snr - spec.snr_db).abs() < 1.0, "snr {snr}");
    }
}
