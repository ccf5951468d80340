//! CSV formats for sensor streams, feature matrices and segment labels.
//!
//! Sensor files are long-format `timestamp_ms,channel_id,value`. Feature files
//! carry one row per segment: `start_ms,end_ms,<channel>_<stat>...`. Label
//! files are `start_ms,end_ms,label` with an optional trailing `outlier`
//! column (`0`/`1`).

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};

use super::{FeatureMatrix, Frame, SegmentSpan, SignalStream, DEFAULT_SAMPLE_PERIOD_MS};

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| WitsError::invalid(format!("line {line}: bad {what} {s:?}")))
}

fn parse_i64(s: &str, line: usize, what: &str) -> Result<i64> {
    s.trim()
        .parse::<i64>()
        .map_err(|_| WitsError::invalid(format!("line {line}: bad {what} {s:?}")))
}

fn expect_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(WitsError::invalid(format!(
            "expected CSV header starting with {}, got {}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Reads a long-format sensor CSV and pivots it into frames.
///
/// Channels are ordered by first appearance. When `sample_period_ms` is
/// `None` it is inferred as the median spacing between timestamps.
pub fn read_sensor_csv<R: Read>(reader: R, sample_period_ms: Option<i64>) -> Result<SignalStream> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    expect_header(rdr.headers()?, &["timestamp_ms", "channel_id", "value"])?;

    let mut channels: Vec<String> = Vec::new();
    let mut channel_idx: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<(i64, usize, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() < 3 {
            return Err(WitsError::invalid(format!("line {line}: expected 3 fields")));
        }
        let ts = parse_i64(&rec[0], line, "timestamp")?;
        let ch = rec[1].to_string();
        let value = parse_f64(&rec[2], line, "value")?;
        let idx = *channel_idx.entry(ch.clone()).or_insert_with(|| {
            channels.push(ch);
            channels.len() - 1
        });
        if let Some(last) = rows.last() {
            if ts < last.0 {
                return Err(WitsError::invalid(format!(
                    "line {line}: rows must be sorted by timestamp"
                )));
            }
        }
        rows.push((ts, idx, value));
    }

    let mut frames: Vec<Frame> = Vec::new();
    let mut seen: Vec<bool> = Vec::new();
    for (ts, idx, value) in rows {
        if frames.last().map(|f| f.ts) != Some(ts) {
            check_complete(&frames, &seen)?;
            frames.push(Frame {
                ts,
                values: vec![f64::NAN; channels.len()],
            });
            seen = vec![false; channels.len()];
        }
        let frame = frames.last_mut().unwrap();
        if seen[idx] {
            return Err(WitsError::invalid(format!(
                "duplicate value for channel {} at {ts} ms",
                channels[idx]
            )));
        }
        frame.values[idx] = value;
        seen[idx] = true;
    }
    check_complete(&frames, &seen)?;

    let period = match sample_period_ms {
        Some(p) => p,
        None => infer_period(&frames),
    };
    SignalStream::new(channels, frames, period)
}

fn check_complete(frames: &[Frame], seen: &[bool]) -> Result<()> {
    if let Some(f) = frames.last() {
        if seen.iter().any(|s| !s) || f.values.len() != seen.len() {
            return Err(WitsError::invalid(format!(
                "frame at {} ms is missing channels",
                f.ts
            )));
        }
    }
    Ok(())
}

fn infer_period(frames: &[Frame]) -> i64 {
    let mut diffs: Vec<i64> = frames.windows(2).map(|w| w[1].ts - w[0].ts).collect();
    if diffs.is_empty() {
        return DEFAULT_SAMPLE_PERIOD_MS;
    }
    diffs.sort_unstable();
    diffs[diffs.len() / 2]
}

pub fn write_sensor_csv<W: Write>(writer: W, stream: &SignalStream) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp_ms", "channel_id", "value"])?;
    for f in stream.frames() {
        for (ch, v) in stream.channels().iter().zip(&f.values) {
            w.write_record([f.ts.to_string(), ch.clone(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_feature_csv<W: Write>(
    writer: W,
    features: &FeatureMatrix,
    spans: &[SegmentSpan],
) -> Result<()> {
    if spans.len() != features.nrows() {
        return Err(WitsError::invalid("one span per feature row is required"));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["start_ms".to_string(), "end_ms".to_string()];
    header.extend(features.columns.iter().cloned());
    w.write_record(&header)?;
    for (i, span) in spans.iter().enumerate() {
        let mut rec = vec![span.start_ms.to_string(), span.end_ms.to_string()];
        rec.extend(features.data.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<(FeatureMatrix, Vec<SegmentSpan>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    expect_header(&headers, &["start_ms", "end_ms"])?;
    let columns: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut spans = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != columns.len() + 2 {
            return Err(WitsError::invalid(format!(
                "line {line}: expected {} fields, got {}",
                columns.len() + 2,
                rec.len()
            )));
        }
        spans.push(SegmentSpan {
            start_ms: parse_i64(&rec[0], line, "start_ms")?,
            end_ms: parse_i64(&rec[1], line, "end_ms")?,
        });
        let row = rec
            .iter()
            .skip(2)
            .map(|s| parse_f64(s, line, "feature"))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((FeatureMatrix::from_rows(columns, &rows)?, spans))
}

/// One labeled segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub start_ms: i64,
    pub end_ms: i64,
    pub label: String,
    #[serde(default)]
    pub outlier: bool,
}

pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<LabelRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    expect_header(rdr.headers()?, &["start_ms", "end_ms", "label"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() < 3 {
            return Err(WitsError::invalid(format!("line {line}: expected 3 fields")));
        }
        let outlier = match rec.get(3).map(str::trim) {
            None | Some("") | Some("0") | Some("false") => false,
            Some("1") | Some("true") => true,
            Some(other) => {
                return Err(WitsError::invalid(format!(
                    "line {line}: bad outlier flag {other:?}"
                )))
            }
        };
        out.push(LabelRecord {
            start_ms: parse_i64(&rec[0], line, "start_ms")?,
            end_ms: parse_i64(&rec[1], line, "end_ms")?,
            label: rec[2].to_string(),
            outlier,
        });
    }
    Ok(out)
}

pub fn write_labels_csv<W: Write>(writer: W, labels: &[LabelRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["start_ms", "end_ms", "label", "outlier"])?;
    for l in labels {
        w.write_record([
            l.start_ms.to_string(),
            l.end_ms.to_string(),
            l.label.clone(),
            (l.outlier as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
