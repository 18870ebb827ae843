//! Hudgins time-domain features: MAV, WL, ZC and SSC per channel per frame.
//!
//! Vectors are laid out channel-major: `[MAV₀, WL₀, ZC₀, SSC₀, MAV₁, ...]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::Recording;
use crate::dsp::{FrameIndex, FrameSpec};
use crate::error::{Error, Result};

pub const FEATURES_PER_CHANNEL: usize = 4;
pub const FEATURE_NAMES: [&str; FEATURES_PER_CHANNEL] = ["MAV", "WL", "ZC", "SSC"];

/// Deadbands for the two counting features. Both default to 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub zc: f64,
    pub ssc: f64,
}

pub fn mav(frame: &[f64]) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::param("MAV of an empty frame"));
    }
    Ok(frame.iter().map(|v| v.abs()).sum::<f64>() / frame.len() as f64)
}

pub fn wl(frame: &[f64]) -> Result<f64> {
    if frame.len() < 2 {
        return Err(Error::param("WL needs at least 2 samples"));
    }
    Ok(frame.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// Sign changes between neighbours whose difference is at least `threshold`.
pub fn zc(frame: &[f64], threshold: f64) -> usize {
    frame
        .windows(2)
        .filter(|w| w[0] * w[1] < 0.0 && (w[0] - w[1]).abs() >= threshold)
        .count()
}

/// Interior local extrema whose larger adjacent step is at least `threshold`.
pub fn ssc(frame: &[f64], threshold: f64) -> Result<usize> {
    if frame.len() < 3 {
        return Err(Error::param("SSC needs at least 3 samples"));
    }
    Ok(frame
        .windows(3)
        .filter(|w| {
            let (left, right) = (w[1] - w[0], w[1] - w[2]);
            left * right > 0.0 && left.abs().max(right.abs()) >= threshold
        })
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub index: FrameIndex,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrameSeries {
    pub frames: Vec<FeatureFrame>,
    pub spec: FrameSpec,
    pub channel_count: usize,
    pub sample_rate: f64,
}

impl FeatureFrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.channel_count * FEATURES_PER_CHANNEL
    }

    pub fn column_names(&self) -> Vec<String> {
        (0..self.channel_count)
            .flat_map(|ch| FEATURE_NAMES.iter().map(move |f| format!("{f}_ch{ch}")))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "frame,start_sample,end_sample")?;
        for name in self.column_names() {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for f in &self.frames {
            write!(
                w,
                "{},{},{}",
                f.index.ordinal, f.index.start_sample, f.index.end_sample
            )?;
            for v in &f.values {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn frame_features(channels: &[Vec<f64>], index: FrameIndex, th: Thresholds) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(channels.len() * FEATURES_PER_CHANNEL);
    for ch in channels {
        let frame = &ch[index.start_sample..index.end_sample];
        values.push(mav(frame)?);
        values.push(wl(frame)?);
        values.push(zc(frame, th.zc) as f64);
        values.push(ssc(frame, th.ssc)? as f64);
    }
    Ok(values)
}

/// One feature vector per whole frame. A recording shorter than one frame
/// yields an empty series.
pub fn extract_features(
    recording: &Recording,
    spec: FrameSpec,
    thresholds: Thresholds,
) -> Result<FeatureFrameSeries> {
    spec.validate()?;
    if thresholds.zc < 0.0 || thresholds.ssc < 0.0 {
        return Err(Error::param("feature thresholds must be non-negative"));
    }
    let frames = (0..spec.frame_count(recording.len()))
        .map(|i| {
            let index = spec.frame(i);
            frame_features(&recording.samples, index, thresholds)
                .map(|values| FeatureFrame { index, values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureFrameSeries {
        frames,
        spec,
        channel_count: recording.channel_count(),
        sample_rate: recording.sample_rate,
    })
}
