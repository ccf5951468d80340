//! Raw signal handling: detrending, segmentation and per-segment features.

mod features;
mod hp;
pub mod io;
mod segment;

pub use features::{extract_features, FeatureOptions, FeatureVector, Stat, STATS_PER_CHANNEL};
pub use hp::{apply_hp_operator, hp_filter, TrendDecomposition};
pub use io::{
    read_feature_csv, read_labels_csv, read_sensor_csv, write_feature_csv, write_labels_csv,
    write_sensor_csv, LabelRecord,
};
pub use segment::{segment, split_runs, Segment, SegmentOptions};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};

/// Default smoothing parameter for 0.5 s sampling.
pub const DEFAULT_LAMBDA: f64 = 100.0;
/// Default sampling period in milliseconds.
pub const DEFAULT_SAMPLE_PERIOD_MS: i64 = 500;
/// Default segment length in milliseconds.
pub const DEFAULT_WINDOW_MS: i64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub ts: i64,
    pub values: Vec<f64>,
}

/// A multi-channel, regularly sampled stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStream {
    channels: Vec<String>,
    frames: Vec<Frame>,
    sample_period_ms: i64,
}

impl SignalStream {
    pub fn new(channels: Vec<String>, frames: Vec<Frame>, sample_period_ms: i64) -> Result<Self> {
        if sample_period_ms <= 0 {
            return Err(WitsError::invalid("sample period must be positive"));
        }
        if channels.is_empty() {
            return Err(WitsError::invalid("stream needs at least one channel"));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.values.len() != channels.len() {
                return Err(WitsError::invalid(format!(
                    "frame {i} has {} values for {} channels",
                    f.values.len(),
                    channels.len()
                )));
            }
            if i > 0 && f.ts <= frames[i - 1].ts {
                return Err(WitsError::invalid(format!(
                    "timestamps must be strictly increasing (frame {i} at {} ms)",
                    f.ts
                )));
            }
        }
        Ok(Self {
            channels,
            frames,
            sample_period_ms,
        })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn sample_period_ms(&self) -> i64 {
        self.sample_period_ms
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Values of one channel across all frames.
    pub fn channel(&self, idx: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.values[idx]).collect()
    }

    /// Replaces the trend of every channel with its HP growth component.
    ///
    /// Each gap-separated run is filtered independently. Runs shorter than
    /// three samples are passed through unchanged.
    pub fn smoothed(&self, lambda: f64) -> Result<SignalStream> {
        let mut frames = self.frames.clone();
        let mut offset = 0;
        for run in split_runs(&self.frames, self.sample_period_ms) {
            let n = run.len();
            if n >= 3 {
                let columns: Vec<Vec<f64>> = (0..self.channels.len())
                    .into_par_iter()
                    .map(|c| {
                        let series: Vec<f64> = run.iter().map(|f| f.values[c]).collect();
                        hp_filter(&series, lambda).map(|d| d.growth)
                    })
                    .collect::<Result<_>>()?;
                for (c, col) in columns.iter().enumerate() {
                    for (i, v) in col.iter().enumerate() {
                        frames[offset + i].values[c] = *v;
                    }
                }
            }
            offset += n;
        }
        SignalStream::new(self.channels.clone(), frames, self.sample_period_ms)
    }
}

/// Rows are samples (segments), columns are named features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if columns.len() != data.ncols() {
            return Err(WitsError::invalid(format!(
                "{} column names for {} columns",
                columns.len(),
                data.ncols()
            )));
        }
        Ok(Self { columns, data })
    }

    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let m = columns.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(WitsError::invalid(format!(
                "row {bad} has {} values, expected {m}",
                rows[bad].len()
            )));
        }
        let data = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
        Ok(Self { columns, data })
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }
}

/// Options for [`featurize_stream`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub lambda: f64,
    pub window_ms: i64,
    /// Segment stride; defaults to the window length (no overlap).
    pub stride_ms: Option<i64>,
    pub entropy_bins: usize,
    /// Compute features on the HP growth component (true) or on the raw
    /// values (false, for ablation).
    pub use_growth: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            window_ms: DEFAULT_WINDOW_MS,
            stride_ms: None,
            entropy_bins: 16,
            use_growth: true,
        }
    }
}

/// Start/end timestamps of one featurized segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub start_ms: i64,
    pub end_ms: i64,
}

/// Column names `<channel>_<stat>` in feature layout order.
pub fn feature_columns(channels: &[String]) -> Vec<String> {
    channels
        .iter()
        .flat_map(|c| Stat::ALL.iter().map(move |s| format!("{c}_{}", s.name())))
        .collect()
}

/// Filter, segment and featurize a stream. Rows align with the returned spans.
pub fn featurize_stream(
    stream: &SignalStream,
    opts: &PipelineOptions,
) -> Result<(FeatureMatrix, Vec<SegmentSpan>)> {
    let seg_opts = SegmentOptions {
        window_ms: opts.window_ms,
        stride_ms: opts.stride_ms,
    };
    seg_opts.validate(stream.sample_period_ms())?;
    let smoothed;
    let source = if opts.use_growth {
        smoothed = stream.smoothed(opts.lambda)?;
        &smoothed
    } else {
        stream
    };
    let segments = segment(source, &seg_opts)?;
    let feat_opts = FeatureOptions {
        entropy_bins: opts.entropy_bins,
    };
    let rows: Vec<Vec<f64>> = segments
        .par_iter()
        .map(|s| extract_features(s, &feat_opts).map(|f| f.values))
        .collect::<Result<_>>()?;
    let spans = segments
        .iter()
        .map(|s| SegmentSpan {
            start_ms: s.start_ts,
            end_ms: s.end_ts,
        })
        .collect();
    let matrix = FeatureMatrix::from_rows(feature_columns(stream.channels()), &rows)?;
    Ok((matrix, spans))
}
