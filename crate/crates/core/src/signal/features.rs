//! The twelve per-channel segment statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WitsError};

use super::Segment;

pub const STATS_PER_CHANNEL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stat {
    Min,
    Max,
    Mean,
    Rms,
    Variance,
    StdDev,
    Kurtosis,
    Skewness,
    Entropy,
    Median,
    ZeroCrossingRate,
    MeanCrossRate,
}

impl Stat {
    pub const ALL: [Stat; STATS_PER_CHANNEL] = [
        Stat::Min,
        Stat::Max,
        Stat::Mean,
        Stat::Rms,
        Stat::Variance,
        Stat::StdDev,
        Stat::Kurtosis,
        Stat::Skewness,
        Stat::Entropy,
        Stat::Median,
        Stat::ZeroCrossingRate,
        Stat::MeanCrossRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stat::Min => "min",
            Stat::Max => "max",
            Stat::Mean => "mean",
            Stat::Rms => "rms",
            Stat::Variance => "variance",
            Stat::StdDev => "std",
            Stat::Kurtosis => "kurtosis",
            Stat::Skewness => "skewness",
            Stat::Entropy => "entropy",
            Stat::Median => "median",
            Stat::ZeroCrossingRate => "zcr",
            Stat::MeanCrossRate => "mcr",
        }
    }

    /// Position inside a channel block.
    pub fn offset(self) -> usize {
        Stat::ALL.iter().position(|s| *s == self).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub entropy_bins: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { entropy_bins: 16 }
    }
}

/// Channel blocks of twelve statistics, concatenated in channel order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, channel: usize, stat: Stat) -> f64 {
        self.values[channel * STATS_PER_CHANNEL + stat.offset()]
    }

    pub fn channel_block(&self, channel: usize) -> &[f64] {
        &self.values[channel * STATS_PER_CHANNEL..(channel + 1) * STATS_PER_CHANNEL]
    }
}

pub fn extract_features(segment: &Segment<'_>, opts: &FeatureOptions) -> Result<FeatureVector> {
    if segment.frames.is_empty() {
        return Err(WitsError::invalid("cannot featurize an empty segment"));
    }
    if opts.entropy_bins == 0 {
        return Err(WitsError::invalid("entropy needs at least one bin"));
    }
    let channels = segment.channel_count();
    let mut values = Vec::with_capacity(channels * STATS_PER_CHANNEL);
    for c in 0..channels {
        values.extend_from_slice(&channel_stats(&segment.channel(c), opts.entropy_bins));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(WitsError::invalid("segment produced non-finite features"));
    }
    Ok(FeatureVector { values })
}

pub(crate) fn channel_stats(x: &[f64], bins: usize) -> [f64; STATS_PER_CHANNEL] {
    let n = x.len() as f64;
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = x.iter().sum::<f64>() / n;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();

    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    // Rounding can leave a tiny spread on constant data; treat it as zero.
    let constant = min == max || m2 <= (f64::EPSILON * mean.abs().max(1.0)).powi(2);
    let (skew, kurt) = if constant {
        (0.0, 0.0)
    } else {
        (m3 / (m2 * std), m4 / (m2 * m2) - 3.0)
    };

    let entropy = histogram_entropy(x, min, max, bins);

    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };

    let zcr = x.windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64;
    let mcr = x
        .windows(2)
        .filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0)
        .count() as f64;

    [
        min, max, mean, rms, m2, std, kurt, skew, entropy, median, zcr, mcr,
    ]
}

fn histogram_entropy(x: &[f64], min: f64, max: f64, bins: usize) -> f64 {
    if min == max {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    let width = max - min;
    for v in x {
        let idx = (((v - min) / width) * bins as f64).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let n = x.len() as f64;
    counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / n;
            -p * p.ln()
        })
        .sum()
}
