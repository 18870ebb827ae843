//! Power-line band-stop filtering and sliding-window frame segmentation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::Recording;
use crate::error::{Error, Result};

pub const DEFAULT_NOTCH_CENTERS: [f64; 3] = [60.0, 180.0, 300.0];
pub const DEFAULT_NOTCH_ORDER: usize = 3;
/// Distance from the center to each -3 dB edge, in Hz.
pub const DEFAULT_NOTCH_HALF_WIDTH: f64 = 2.0;

/// Sliding-window geometry in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub frame_length: usize,
    pub increment: usize,
}

impl FrameSpec {
    /// 160 ms frames every 16 ms at 1 kHz.
    pub const DEFAULT: FrameSpec = FrameSpec {
        frame_length: 160,
        increment: 16,
    };

    pub fn new(frame_length: usize, increment: usize) -> Result<Self> {
        let spec = Self {
            frame_length,
            increment,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_ms(frame_ms: f64, increment_ms: f64, sample_rate: f64) -> Result<Self> {
        let to_samples = |ms: f64| (ms * sample_rate / 1000.0).round();
        let (l, s) = (to_samples(frame_ms), to_samples(increment_ms));
        if !(l >= 1.0 && s >= 1.0) {
            return Err(Error::param("frame length and increment must be ≥ 1 sample"));
        }
        Self::new(l as usize, s as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 {
            return Err(Error::param("frame length must be ≥ 1"));
        }
        if self.increment == 0 || self.increment > self.frame_length {
            return Err(Error::param("increment must lie in 1..=frame_length"));
        }
        Ok(())
    }

    /// Number of whole frames that fit in `length` samples.
    pub fn frame_count(&self, length: usize) -> usize {
        if length < self.frame_length {
            0
        } else {
            (length - self.frame_length) / self.increment + 1
        }
    }

    pub fn frame(&self, ordinal: usize) -> FrameIndex {
        let start = ordinal * self.increment;
        FrameIndex {
            ordinal,
            start_sample: start,
            end_sample: start + self.frame_length,
        }
    }
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameIndex {
    pub ordinal: usize,
    pub start_sample: usize,
    /// Exclusive. Decisions for this frame become available at this sample.
    pub end_sample: usize,
}

pub fn segment_frames(length: usize, spec: FrameSpec) -> Vec<FrameIndex> {
    (0..spec.frame_count(length)).map(|i| spec.frame(i)).collect()
}

/// Second-order section, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

/// Cascade of second-order sections applied causally.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in out.iter_mut() {
                let x = *v;
                let y = s.b[0] * x + z1;
                z1 = s.b[1] * x - s.a[1] * y + z2;
                z2 = s.b[2] * x - s.a[2] * y;
                *v = y;
            }
        }
        out
    }

    /// Magnitude response at `freq` Hz.
    pub fn gain_at(&self, freq: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / sample_rate;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| {
                let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
                let den = s.a[0] + z1 * s.a[1] + z2 * s.a[2];
                (num / den).norm()
            })
            .product()
    }
}

/// Digital Butterworth band-stop of prototype order `order` (2·order poles)
/// with -3 dB edges at `center ± half_width`, via the bilinear transform
/// with pre-warped edges. Unity gain at DC.
pub fn design_bandstop(
    sample_rate: f64,
    center: f64,
    half_width: f64,
    order: usize,
) -> Result<SosFilter> {
    let nyquist = sample_rate / 2.0;
    if !(center > 0.0 && center < nyquist) {
        return Err(Error::param(format!(
            "notch center {center} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    if order == 0 {
        return Err(Error::param("filter order must be ≥ 1"));
    }
    let (lo, hi) = (center - half_width, center + half_width);
    if !(half_width > 0.0 && lo > 0.0 && hi < nyquist) {
        return Err(Error::param(format!(
            "stopband {lo}..{hi} Hz must lie inside (0, {nyquist}) Hz"
        )));
    }
    let k = 2.0 * sample_rate;
    let warp = |f: f64| k * (std::f64::consts::PI * f / sample_rate).tan();
    let (w1, w2) = (warp(lo), warp(hi));
    let w0 = (w1 * w2).sqrt();
    let bw = w2 - w1;

    let mut poles = Vec::with_capacity(2 * order);
    for i in 0..order {
        let theta = std::f64::consts::PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        // lowpass pole p maps to the roots of s^2 - (bw/p) s + w0^2
        let b = Complex64::new(bw, 0.0) / p;
        let disc = (b * b - 4.0 * w0 * w0).sqrt();
        for s in [(b + disc) / 2.0, (b - disc) / 2.0] {
            poles.push((k + s) / (k - s));
        }
    }

    let zero_angle = 2.0 * (w0 / k).atan();
    let num = [1.0, -2.0 * zero_angle.cos(), 1.0];
    let mut sections = Vec::with_capacity(order);
    let mut reals = Vec::new();
    for z in &poles {
        if z.im > 1e-12 {
            sections.push([-2.0 * z.re, z.norm_sqr()]);
        } else if z.im.abs() <= 1e-12 {
            reals.push(z.re);
        }
    }
    for pair in reals.chunks(2) {
        match pair {
            [p, q] => sections.push([-(p + q), p * q]),
            [p] => sections.push([-p, 0.0]),
            _ => unreachable!(),
        }
    }
    let sections = sections
        .into_iter()
        .map(|[a1, a2]| {
            let dc = (1.0 + a1 + a2) / (num[0] + num[1] + num[2]);
            Biquad {
                b: [num[0] * dc, num[1] * dc, num[2] * dc],
                a: [1.0, a1, a2],
            }
        })
        .collect();
    Ok(SosFilter { sections })
}

/// Band-stop with the default ±2 Hz stopband.
pub fn bandstop_filter(
    signal: &[f64],
    sample_rate: f64,
    center: f64,
    order: usize,
) -> Result<Vec<f64>> {
    let filter = design_bandstop(sample_rate, center, DEFAULT_NOTCH_HALF_WIDTH, order)?;
    Ok(filter.apply(signal))
}

/// Applies one order-3 band-stop per center, in sequence, to every channel.
pub fn apply_notch_bank(recording: &Recording, centers: &[f64]) -> Result<Recording> {
    apply_notch_bank_with(
        recording,
        centers,
        DEFAULT_NOTCH_ORDER,
        DEFAULT_NOTCH_HALF_WIDTH,
    )
}

pub fn apply_notch_bank_with(
    recording: &Recording,
    centers: &[f64],
    order: usize,
    half_width: f64,
) -> Result<Recording> {
    let filters = centers
        .iter()
        .map(|&c| design_bandstop(recording.sample_rate, c, half_width, order))
        .collect::<Result<Vec<_>>>()?;
    let samples = recording
        .samples
        .iter()
        .map(|channel| {
            filters
                .iter()
                .fold(channel.clone(), |acc, f| f.apply(&acc))
        })
        .collect();
    Ok(Recording {
        samples,
        ..recording.clone()
    })
}
