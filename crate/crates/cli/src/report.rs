use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use wits_core::recognizer::{knn_baseline, read_results_jsonl, ResultRecord};
use wits_core::scaler::Standardizer;
use wits_core::signal::{read_feature_csv, read_labels_csv, LabelRecord, SegmentSpan};
use wits_core::WitsError;

use crate::commands::covering_label;
use crate::{CliError, CliResult};

#[derive(Args)]
pub struct ReportArgs {
    /// Classification output (JSONL).
    #[arg(long)]
    results: PathBuf,
    /// Ground-truth labels CSV.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the confusion matrix as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Training features for the k-nearest-neighbor baseline.
    #[arg(long, requires_all = ["knn_train_labels", "knn_test_features"])]
    knn_train_features: Option<PathBuf>,
    #[arg(long)]
    knn_train_labels: Option<PathBuf>,
    /// Test features aligned with `--truth`.
    #[arg(long)]
    knn_test_features: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(Debug, Serialize)]
pub struct ClassStats {
    pub class: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Serialize)]
pub struct AnomalyStats {
    pub flagged: usize,
    pub outliers: usize,
    /// Undefined without planted outliers.
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub false_positive_rate: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct KnnStats {
    pub k: usize,
    pub accuracy: f64,
    /// Our accuracy minus the baseline's, in percentage points.
    pub margin_pp: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub segments: usize,
    pub clean_segments: usize,
    /// Over segments without a planted outlier.
    pub accuracy: f64,
    pub accuracy_all: f64,
    pub classes: Vec<String>,
    /// Rows are true classes, columns predictions, clean segments only.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassStats>,
    pub anomaly: AnomalyStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knn: Option<KnnStats>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn span_of(r: &ResultRecord) -> SegmentSpan {
    SegmentSpan {
        start_ms: r.start_ms,
        end_ms: r.end_ms,
    }
}

pub fn build_report(results: &[ResultRecord], truth: &[LabelRecord]) -> CliResult<Report> {
    let pairs: Vec<(&ResultRecord, &LabelRecord)> = results
        .iter()
        .filter_map(|r| covering_label(truth, &span_of(r)).map(|t| (r, t)))
        .collect();
    if pairs.is_empty() {
        return Err(WitsError::InvalidInput("no result overlaps a ground-truth label".into()).into());
    }
    let classes: Vec<String> = pairs
        .iter()
        .flat_map(|(r, t)| [r.label.clone(), t.label.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let idx = |l: &str| classes.iter().position(|c| c == l).expect("collected above");
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let (mut clean, mut correct, mut correct_all) = (0, 0, 0);
    let (mut outliers, mut caught, mut false_alarms, mut flagged) = (0, 0, 0, 0);
    for (r, t) in &pairs {
        let hit = r.label == t.label;
        correct_all += hit as usize;
        flagged += r.abnormal as usize;
        if t.outlier {
            outliers += 1;
            caught += r.abnormal as usize;
        } else {
            clean += 1;
            correct += hit as usize;
            false_alarms += r.abnormal as usize;
            confusion[idx(&t.label)][idx(&r.label)] += 1;
        }
    }
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let tp = confusion[i][i];
            let support: usize = confusion[i].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[i]).sum();
            let precision = ratio(tp, predicted).unwrap_or(0.0);
            let recall = ratio(tp, support).unwrap_or(0.0);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassStats {
                class: c.clone(),
                support,
                precision,
                recall,
                f1,
            }
        })
        .collect();
    Ok(Report {
        segments: pairs.len(),
        clean_segments: clean,
        accuracy: ratio(correct, clean).unwrap_or(0.0),
        accuracy_all: correct_all as f64 / pairs.len() as f64,
        classes,
        confusion,
        per_class,
        anomaly: AnomalyStats {
            flagged,
            outliers,
            recall: ratio(caught, outliers),
            precision: ratio(caught, flagged),
            false_positive_rate: ratio(false_alarms, clean),
        },
        knn: None,
    })
}

fn open(path: &PathBuf) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Core(WitsError::InvalidInput(format!("cannot open {}: {e}", path.display()))))
}

/// Accuracy of kNN on standardized features. Test rows are scored against
/// the label covering them; uncovered rows are skipped.
fn knn_accuracy(a: &ReportArgs, train_f: &PathBuf, truth: &[LabelRecord], classes: &mut Vec<String>) -> CliResult<f64> {
    let (ftr, str_) = read_feature_csv(open(train_f)?)?;
    let ltr = read_labels_csv(open(a.knn_train_labels.as_ref().expect("clap requires it"))?)?;
    let (fte, ste) = read_feature_csv(open(a.knn_test_features.as_ref().expect("clap requires it"))?)?;
    let mut class_id = |l: &str| match classes.iter().position(|c| c == l) {
        Some(i) => i,
        None => {
            classes.push(l.to_string());
            classes.len() - 1
        }
    };
    let mut rows = Vec::new();
    let mut ytr = Vec::new();
    for (i, s) in str_.iter().enumerate() {
        if let Some(l) = covering_label(&ltr, s).filter(|l| !l.outlier) {
            rows.push(ftr.data.row(i).into_owned());
            ytr.push(class_id(&l.label));
        }
    }
    if rows.is_empty() {
        return Err(WitsError::InvalidInput("no labeled kNN training rows".into()).into());
    }
    let xtr = nalgebra::DMatrix::from_rows(&rows);
    let scaler = Standardizer::fit(&xtr)?;
    let pred = knn_baseline(&scaler.transform(&xtr)?, &ytr, &scaler.transform(&fte.data)?, a.k)?;
    let (mut n, mut hit) = (0usize, 0usize);
    for (p, s) in pred.iter().zip(&ste) {
        if let Some(t) = covering_label(truth, s) {
            n += 1;
            hit += (classes.get(*p) == Some(&t.label)) as usize;
        }
    }
    ratio(hit, n).ok_or_else(|| WitsError::InvalidInput("no kNN test row overlaps a label".into()).into())
}

pub fn report(a: ReportArgs) -> CliResult {
    let results = read_results_jsonl(open(&a.results)?)?;
    let truth = read_labels_csv(open(&a.truth)?)?;
    let mut rep = build_report(&results, &truth)?;
    if let Some(train_f) = &a.knn_train_features {
        let mut classes = Vec::new();
        let acc = knn_accuracy(&a, train_f, &truth, &mut classes)?;
        rep.knn = Some(KnnStats {
            k: a.k,
            accuracy: acc,
            margin_pp: 100.0 * (rep.accuracy - acc),
        });
    }
    let mut w = std::io::BufWriter::new(File::create(&a.out)?);
    serde_json::to_writer_pretty(&mut w, &rep)?;
    w.write_all(b"\n")?;
    w.flush()?;
    if let Some(p) = &a.csv {
        let mut w = std::io::BufWriter::new(File::create(p)?);
        writeln!(w, "truth\\predicted,{}", rep.classes.join(","))?;
        for (c, row) in rep.classes.iter().zip(&rep.confusion) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{c},{}", cells.join(","))?;
        }
        w.flush()?;
    }
    println!("accuracy {:.4} over {} clean segments", rep.accuracy, rep.clean_segments);
    if let Some(k) = &rep.knn {
        println!("knn (k={}) accuracy {:.4}, margin {:+.1} pp", k.k, k.accuracy, k.margin_pp);
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "anomaly recall {} ({} outliers), false-positive rate {}",
        fmt(rep.anomaly.recall),
        rep.anomaly.outliers,
        fmt(rep.anomaly.false_positive_rate)
    );
    println!("confusion (rows true, columns predicted): {}", rep.classes.join(" "));
    for (c, row) in rep.classes.iter().zip(&rep.confusion) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:4}")).collect();
        println!("  {c:>12} {}", cells.join(""));
    }
    Ok(())
}
