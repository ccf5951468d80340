use crate::error::{Result, WitsError};

use super::{Frame, SignalStream, DEFAULT_WINDOW_MS};

/// A fixed-length window of consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<'a> {
    pub start_ts: i64,
    pub end_ts: i64,
    pub frames: &'a [Frame],
}

impl Segment<'_> {
    pub fn window_ms(&self) -> i64 {
        self.end_ts - self.start_ts
    }

    pub fn channel_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.values.len())
    }

    pub fn channel(&self, idx: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.values[idx]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentOptions {
    pub window_ms: i64,
    /// `None` means non-overlapping windows.
    pub stride_ms: Option<i64>,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            window_ms: DEFAULT_WINDOW_MS,
            stride_ms: None,
        }
    }
}

impl SegmentOptions {
    pub(crate) fn validate(&self, sample_period_ms: i64) -> Result<()> {
        if self.window_ms < 2 * sample_period_ms {
            return Err(WitsError::invalid(format!(
                "window of {} ms is shorter than two samples ({} ms period)",
                self.window_ms, sample_period_ms
            )));
        }
        if let Some(stride) = self.stride_ms {
            if stride < sample_period_ms {
                return Err(WitsError::invalid(format!(
                    "stride of {stride} ms is shorter than one sample"
                )));
            }
        }
        Ok(())
    }
}

/// Splits frames wherever consecutive timestamps are more than two sample
/// periods apart.
pub fn split_runs(frames: &[Frame], sample_period_ms: i64) -> Vec<&[Frame]> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..frames.len() {
        if frames[i].ts - frames[i - 1].ts > 2 * sample_period_ms {
            runs.push(&frames[start..i]);
            start = i;
        }
    }
    if start < frames.len() {
        runs.push(&frames[start..]);
    }
    runs
}

/// Cuts the stream into full windows. Each gap-free run is segmented on its
/// own and a trailing partial window is dropped.
pub fn segment<'a>(stream: &'a SignalStream, opts: &SegmentOptions) -> Result<Vec<Segment<'a>>> {
    let period = stream.sample_period_ms();
    opts.validate(period)?;
    let per_window = (opts.window_ms / period) as usize;
    let stride = (opts.stride_ms.unwrap_or(opts.window_ms) / period).max(1) as usize;

    let mut out = Vec::new();
    for run in split_runs(stream.frames(), period) {
        let mut offset = 0;
        while offset + per_window <= run.len() {
            let frames = &run[offset..offset + per_window];
            let start_ts = frames[0].ts;
            out.push(Segment {
                start_ts,
                end_ts: start_ts + opts.window_ms,
                frames,
            });
            offset += stride;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_of(seconds: f64) -> SignalStream {
        let n = (seconds / 0.5).round() as usize;
        let frames = (0..n)
            .map(|i| Frame {
                ts: i as i64 * 500,
                values: vec![i as f64],
            })
            .collect();
        SignalStream::new(vec!["a".into()], frames, 500).unwrap()
    }

    #[test]
    fn forty_five_seconds() {
        let s = stream_of(45.0);
        let segs = segment(&s, &SegmentOptions::default()).unwrap();
        assert_eq!(segs.len(), 4);
        for (i, seg) in segs.iter().enumerate() {
            assert_eq!(seg.frames.len(), 20);
            assert_eq!(seg.window_ms(), 10_000);
            assert_eq!(seg.start_ts, i as i64 * 10_000);
        }
    }

    #[test]
    fn short_and_exact_streams() {
        assert!(segment(&stream_of(9.0), &SegmentOptions::default())
            .unwrap()
            .is_empty());
        assert_eq!(
            segment(&stream_of(10.0), &SegmentOptions::default())
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn tiny_window_rejected() {
        let s = stream_of(20.0);
        let opts = SegmentOptions {
            window_ms: 900,
            stride_ms: None,
        };
        assert!(segment(&s, &opts).is_err());
    }

    #[test]
    fn overlapping_stride() {
        let s = stream_of(20.0);
        let opts = SegmentOptions {
            window_ms: 10_000,
            stride_ms: Some(5_000),
        };
        assert_eq!(segment(&s, &opts).unwrap().len(), 3);
    }

    #[test]
    fn gaps_split_runs() {
        let mut frames: Vec<Frame> = (0..30)
            .map(|i| Frame {
                ts: i * 500,
                values: vec![0.0],
            })
            .collect();
        // 12 s hole, then another 15 s.
        frames.extend((0..30).map(|i| Frame {
            ts: 27_000 + i * 500,
            values: vec![0.0],
        }));
        let s = SignalStream::new(vec!["a".into()], frames, 500).unwrap();
        assert_eq!(split_runs(s.frames(), 500).len(), 2);
        let segs = segment(&s, &SegmentOptions::default()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].start_ts, 27_000);
    }
}
