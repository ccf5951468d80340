use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use log::{info, warn};
use nalgebra::DMatrix;
use serde::Serialize;
use wits_core::events::{activity_events, read_events_jsonl, write_events_jsonl};
use wits_core::mtdl::{Hyperparams, Model};
use wits_core::recognizer::{
    calibrate_threshold, classify as classify_rows, cross_fit_scores, fit_model, recognize_stream,
    write_results_jsonl, RecognitionResult, ResultRecord, ScoringMode,
};
use wits_core::rules::{parse_rules, read_action_log, run, write_action_log, EngineConfig, RuleSet};
use wits_core::signal::{
    featurize_stream, hp_filter, read_feature_csv, read_labels_csv, read_sensor_csv,
    write_feature_csv, write_labels_csv, write_sensor_csv, FeatureMatrix, Frame, LabelRecord,
    SegmentSpan, SignalStream,
};
use wits_core::simhome::{self, ScenarioScript};
use wits_core::WitsError;

use crate::config::RunConfig;
use crate::{CliError, CliResult, ConfigArg};

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Core(WitsError::InvalidInput(format!("cannot open {}: {e}", path.display()))))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_model(path: &Path) -> CliResult<Model> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Core(WitsError::InvalidInput(format!("cannot read {}: {e}", path.display()))))?;
    Ok(Model::from_json(&text)?)
}

#[derive(Args)]
pub struct FilterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = wits_core::signal::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Write the cyclical component instead of the growth.
    #[arg(long)]
    cycle: bool,
    /// Sample period; inferred from the timestamps when omitted.
    #[arg(long)]
    period_ms: Option<i64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn filter(a: FilterArgs) -> CliResult {
    let stream = read_sensor_csv(open(&a.input)?, a.period_ms)?;
    let filtered = if a.cycle {
        let mut frames: Vec<Frame> = stream.frames().to_vec();
        for c in 0..stream.channels().len() {
            let series = stream.channel(c);
            if series.len() < 3 {
                continue;
            }
            let dec = hp_filter(&series, a.lambda)?;
            for (f, v) in frames.iter_mut().zip(dec.cyclical) {
                f.values[c] = v;
            }
        }
        SignalStream::new(stream.channels().to_vec(), frames, stream.sample_period_ms())?
    } else {
        stream.smoothed(a.lambda)?
    };
    let mut w = create(&a.out)?;
    write_sensor_csv(&mut w, &filtered)?;
    w.flush()?;
    Ok(())
}

#[derive(Args)]
pub struct FeaturizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    window_ms: Option<i64>,
    #[arg(long)]
    stride_ms: Option<i64>,
    /// Featurize raw values instead of the HP growth component.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    period_ms: Option<i64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn featurize(a: FeaturizeArgs) -> CliResult {
    let mut opts = RunConfig::load(a.config.config.as_deref())?.pipeline;
    if let Some(l) = a.lambda {
        opts.lambda = l;
    }
    if let Some(w) = a.window_ms {
        opts.window_ms = w;
    }
    if a.stride_ms.is_some() {
        opts.stride_ms = a.stride_ms;
    }
    if a.raw {
        opts.use_growth = false;
    }
    let stream = read_sensor_csv(open(&a.input)?, a.period_ms)?;
    let (features, spans) = featurize_stream(&stream, &opts)?;
    info!("{} segments x {} features", features.nrows(), features.ncols());
    let mut w = create(&a.out)?;
    write_feature_csv(&mut w, &features, &spans)?;
    w.flush()?;
    Ok(())
}

/// The label record whose interval contains `span`, if any.
pub fn covering_label<'a>(labels: &'a [LabelRecord], span: &SegmentSpan) -> Option<&'a LabelRecord> {
    labels
        .iter()
        .find(|l| l.start_ms <= span.start_ms && span.end_ms <= l.end_ms)
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    /// Atoms per dictionary.
    #[arg(long)]
    atoms: Option<usize>,
    /// Shared subspace dimension.
    #[arg(long)]
    shared_dim: Option<usize>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    calibration_folds: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn apply_overrides(h: &mut Hyperparams, a: &TrainArgs) {
    if let Some(v) = a.seed {
        h.seed = v;
    }
    if let Some(v) = a.lambda1 {
        h.lambda1 = v;
    }
    if let Some(v) = a.lambda2 {
        h.lambda2 = v;
    }
    if let Some(v) = a.lambda3 {
        h.lambda3 = v;
    }
    if let Some(v) = a.atoms {
        h.d = v;
    }
    if let Some(v) = a.shared_dim {
        h.sd = v;
    }
    if let Some(v) = a.max_sweeps {
        h.max_sweeps = v;
    }
}

/// Training rows: labeled, non-outlier segments.
fn labeled_rows(features: &FeatureMatrix, spans: &[SegmentSpan], labels: &[LabelRecord]) -> (DMatrix<f64>, Vec<String>) {
    let mut rows = Vec::new();
    let mut names = Vec::new();
    let mut unlabeled = 0;
    for (i, span) in spans.iter().enumerate() {
        match covering_label(labels, span) {
            Some(l) if !l.outlier => {
                rows.push(features.data.row(i).into_owned());
                names.push(l.label.clone());
            }
            Some(_) => {}
            None => unlabeled += 1,
        }
    }
    if unlabeled > 0 {
        warn!("{unlabeled} feature rows have no covering label and were skipped");
    }
    let x = if rows.is_empty() {
        DMatrix::zeros(0, features.ncols())
    } else {
        DMatrix::from_rows(&rows)
    };
    (x, names)
}

pub fn train(a: TrainArgs) -> CliResult {
    let mut cfg = RunConfig::load(a.config.config.as_deref())?;
    apply_overrides(&mut cfg.hyper, &a);
    if let Some(q) = a.quantile {
        cfg.quantile = q;
    }
    if let Some(f) = a.calibration_folds {
        cfg.calibration_folds = f;
    }
    let (features, spans) = read_feature_csv(open(&a.features)?)?;
    let labels = read_labels_csv(open(&a.labels)?)?;
    let (x, names) = labeled_rows(&features, &spans, &labels);
    if x.nrows() == 0 {
        return Err(WitsError::InvalidInput("no labeled training rows".into()).into());
    }
    let classes = if cfg.classes.is_empty() {
        let mut c: Vec<String> = Vec::new();
        for n in &names {
            if !c.contains(n) {
                c.push(n.clone());
            }
        }
        c
    } else {
        cfg.classes.clone()
    };
    info!("training on {} rows, {} classes", x.nrows(), classes.len());
    let mut model = fit_model(&x, &names, &classes, &cfg.hyper)?;
    let scores = if cfg.calibration_folds >= 2 {
        cross_fit_scores(&x, &names, &classes, &cfg.hyper, cfg.calibration_folds, cfg.scoring)?
    } else {
        classify_rows(&x, &model, cfg.scoring, f64::INFINITY)?
            .iter()
            .map(|r| r.normality)
            .collect()
    };
    model.epsilon = Some(calibrate_threshold(&scores, cfg.quantile)?);
    info!(
        "final objective {:.6e} after {} sweeps, epsilon {:.6e}",
        model.j_trace.last().copied().unwrap_or(f64::NAN),
        model.j_trace.len() - 1,
        model.epsilon.unwrap_or(f64::NAN)
    );
    let mut w = create(&a.out)?;
    w.write_all(model.to_json()?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn records(spans: &[SegmentSpan], results: &[RecognitionResult]) -> Vec<ResultRecord> {
    spans
        .iter()
        .zip(results)
        .map(|(s, r)| ResultRecord {
            start_ms: s.start_ms,
            end_ms: s.end_ms,
            label: r.label.name.clone(),
            scores: r.scores.clone(),
            normality: r.normality,
            abnormal: r.abnormal,
        })
        .collect()
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// full, no_shared or residual.
    #[arg(long, default_value = "full")]
    mode: ScoringMode,
    /// Abnormality threshold; defaults to the model's calibrated one.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Also write activity change events derived from the labels.
    #[arg(long)]
    events_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn write_results(path: &Path, recs: &[ResultRecord]) -> CliResult {
    let mut w = create(path)?;
    write_results_jsonl(&mut w, recs)?;
    w.flush()?;
    Ok(())
}

pub fn classify(a: ClassifyArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let (features, spans) = read_feature_csv(open(&a.features)?)?;
    let eps = a.epsilon.or(model.epsilon).unwrap_or(f64::INFINITY);
    let results = classify_rows(&features.data, &model, a.mode, eps)?;
    let recs = records(&spans, &results);
    write_results(&a.out, &recs)?;
    if let Some(p) = &a.events_out {
        let events = activity_events(recs.iter().map(|r| (r.start_ms, r.label.as_str())));
        let mut w = create(p)?;
        write_events_jsonl(&mut w, &events)?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Args)]
pub struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Recalibrate the threshold at this quantile of the scores of
    /// `--calibrate` rows.
    #[arg(long)]
    quantile: Option<f64>,
    /// Feature CSV whose scores define the threshold.
    #[arg(long)]
    calibrate: Option<PathBuf>,
    /// Explicit threshold; overrides calibration.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value = "full")]
    mode: ScoringMode,
    #[arg(long)]
    out: PathBuf,
}

pub fn detect(a: DetectArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let eps = match (a.epsilon, &a.calibrate) {
        (Some(e), _) => e,
        (None, Some(path)) => {
            let (cal, _) = read_feature_csv(open(path)?)?;
            let scores: Vec<f64> = classify_rows(&cal.data, &model, a.mode, f64::INFINITY)?
                .iter()
                .map(|r| r.normality)
                .collect();
            calibrate_threshold(&scores, a.quantile.unwrap_or(wits_core::recognizer::DEFAULT_QUANTILE))?
        }
        (None, None) => {
            if a.quantile.is_some() {
                return Err(CliError::Usage("--quantile needs --calibrate".into()));
            }
            model
                .epsilon
                .ok_or_else(|| CliError::Usage("model has no threshold; pass --epsilon or --calibrate".into()))?
        }
    };
    let (features, spans) = read_feature_csv(open(&a.features)?)?;
    let results = classify_rows(&features.data, &model, a.mode, eps)?;
    let recs = records(&spans, &results);
    let flagged = recs.iter().filter(|r| r.abnormal).count();
    eprintln!("{flagged} of {} segments abnormal at epsilon {eps:.6e}", recs.len());
    write_results(&a.out, &recs)
}

fn load_rules(path: &Path) -> CliResult<RuleSet> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Core(WitsError::InvalidInput(format!("cannot read {}: {e}", path.display()))))?;
    parse_rules(&text).map_err(|e| match e {
        WitsError::Syntax { line, column, message } => CliError::Core(WitsError::Syntax {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        }),
        other => other.into(),
    })
}

#[derive(Args)]
pub struct RulesCheckArgs {
    #[arg(long)]
    rules: PathBuf,
    /// Print the rules in normalized form.
    #[arg(long)]
    print: bool,
}

pub fn rules_check(a: RulesCheckArgs) -> CliResult {
    let rules = load_rules(&a.rules)?;
    if a.print {
        print!("{rules}");
    }
    println!("{} rules accepted", rules.len());
    Ok(())
}

#[derive(Args)]
pub struct RulesRunArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    events: PathBuf,
    /// Fire pending timers up to this timestamp after the last event.
    #[arg(long)]
    until: Option<i64>,
    /// Local time offset from UTC, in minutes, for clock windows.
    #[arg(long, default_value_t = 0)]
    tz_offset_min: i64,
    #[arg(long, default_value_t = wits_core::rules::DEFAULT_EMISSION_CAP)]
    emission_cap: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn rules_run(a: RulesRunArgs) -> CliResult {
    let rules = load_rules(&a.rules)?;
    let events = read_events_jsonl(open(&a.events)?)?;
    let config = EngineConfig {
        emission_cap: a.emission_cap,
        tz_offset_ms: a.tz_offset_min * 60_000,
    };
    let log = run(&rules, events, a.until, config)?;
    let mut w = create(&a.out)?;
    write_action_log(&mut w, &log)?;
    w.flush()?;
    info!("{} actions", log.len());
    // The written log must read back identically.
    debug_assert_eq!(read_action_log(BufReader::new(File::open(&a.out)?))?, log);
    Ok(())
}

#[derive(Args)]
pub struct SimArgs {
    /// Scenario script JSON; the built-in day when omitted.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the recognition benchmark (train/ and test/) instead of a script.
    #[arg(long, conflicts_with = "script")]
    benchmark: bool,
    /// Test-split outlier rate for --benchmark.
    #[arg(long, requires = "benchmark")]
    outlier_rate: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn write_sim(dir: &Path, script: &ScenarioScript, planted: &simhome::PlantedModel) -> CliResult {
    let g = simhome::generate(script, planted)?;
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("sensors.csv"))?;
    write_sensor_csv(&mut w, &g.stream)?;
    w.flush()?;
    let mut w = create(&dir.join("labels.csv"))?;
    write_labels_csv(&mut w, &g.segments)?;
    w.flush()?;
    let mut w = create(&dir.join("events.jsonl"))?;
    write_events_jsonl(&mut w, &g.events)?;
    w.flush()?;
    write_json(&dir.join("script.json"), script)?;
    info!("{}: {} segments, {} events", dir.display(), g.segments.len(), g.events.len());
    Ok(())
}

pub fn sim(a: SimArgs) -> CliResult {
    if a.benchmark {
        let mut spec = simhome::BenchmarkSpec::default();
        if let Some(s) = a.seed {
            spec.seed = s;
        }
        if let Some(r) = a.outlier_rate {
            spec.test_outlier_rate = r;
        }
        let b = simhome::benchmark(&spec)?;
        write_json(&a.out.join("planted.json"), &b.planted)?;
        write_sim(&a.out.join("train"), &b.train, &b.planted)?;
        return write_sim(&a.out.join("test"), &b.test, &b.planted);
    }
    let mut script = match &a.script {
        Some(p) => serde_json::from_reader(open(p)?)?,
        None => ScenarioScript::default(),
    };
    if let Some(s) = a.seed {
        script.seed = s;
    }
    let planted = script.plant()?;
    write_json(&a.out.join("planted.json"), &planted)?;
    write_sim(&a.out, &script, &planted)
}

#[derive(Args)]
pub struct LatencyArgs {
    #[arg(long, default_value_t = 20)]
    channels: usize,
    /// Model to classify with; a small one is trained on synthetic data
    /// when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the timing summary here as JSON as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LatencyReport {
    channels: usize,
    frames: usize,
    repeats: usize,
    /// Milliseconds, median over repeats.
    read_ms: f64,
    filter_featurize_ms: f64,
    classify_ms: f64,
    algorithmic_ms: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Trains a small model on a synthetic home with `channels` channels.
pub fn latency_model(channels: usize, seed: u64) -> wits_core::Result<(Model, simhome::Benchmark)> {
    let spec = simhome::BenchmarkSpec {
        seed,
        channels,
        train_per_class: 20,
        test_per_class: 1,
        ..simhome::BenchmarkSpec::default()
    };
    let b = simhome::benchmark(&spec)?;
    let g = simhome::generate(&b.train, &b.planted)?;
    let (f, _) = featurize_stream(&g.stream, &Default::default())?;
    let names: Vec<String> = g.segments.iter().map(|s| s.label.clone()).collect();
    let hyper = Hyperparams {
        d: 8,
        max_sweeps: 5,
        seed,
        ..Hyperparams::default()
    };
    let model = fit_model(&f.data, &names, &b.train.class_names(), &hyper)?;
    Ok((model, b))
}

pub fn latency(a: LatencyArgs) -> CliResult {
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats must be positive".into()));
    }
    let (model, bench) = latency_model(a.channels, a.seed)?;
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => model,
    };
    let script = &bench.test;
    let mut one = script.clone();
    one.activities.truncate(1);
    one.activities[0].duration_ms = one.window_ms;
    let g = simhome::generate(&one, &bench.planted)?;
    let mut csv = Vec::new();
    write_sensor_csv(&mut csv, &g.stream)?;

    let opts = Default::default();
    let (mut read, mut feat, mut cls) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..a.repeats {
        let t0 = Instant::now();
        let stream = read_sensor_csv(csv.as_slice(), Some(script.sample_period_ms))?;
        let t1 = Instant::now();
        let (features, _) = featurize_stream(&stream, &opts)?;
        let t2 = Instant::now();
        classify_rows(&features.data, &model, ScoringMode::Full, f64::INFINITY)?;
        let t3 = Instant::now();
        read.push((t1 - t0).as_secs_f64() * 1e3);
        feat.push((t2 - t1).as_secs_f64() * 1e3);
        cls.push((t3 - t2).as_secs_f64() * 1e3);
    }
    // End-to-end once more through the combined entry point.
    recognize_stream(&g.stream, &opts, &model, ScoringMode::Full, f64::INFINITY)?;
    let total: Vec<f64> = feat.iter().zip(&cls).map(|(f, c)| f + c).collect();
    let report = LatencyReport {
        channels: a.channels,
        frames: g.stream.len(),
        repeats: a.repeats,
        read_ms: median(read),
        filter_featurize_ms: median(feat),
        classify_ms: median(cls),
        algorithmic_ms: median(total),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(p) = &a.out {
        write_json(p, &report)?;
    }
    Ok(())
}
