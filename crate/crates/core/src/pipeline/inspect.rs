//! Per-frame decision traces for plotting a continuous test.
//!
//! A time slice is framed from its own first sample, after filtering the
//! whole recording, so it holds exactly `frame_count(slice length)` rows.
//! Majority voting restarts at the slice start. Span kinds always come from
//! the segmentation of the full recording.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{prepare_recording, ExperimentConfig};
use crate::classify::ClassifierModel;
use crate::dataset::{MotionClass, PromptTimeline, Recording};
use crate::dsp::apply_notch_bank_with;
use crate::error::{Error, Result};
use crate::features::frame_features;
use crate::stream::{find_steady_states, majority_vote, DecisionStream, FrameClock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanKind {
    Steady,
    Transition,
    None,
}

impl SpanKind {
    pub fn name(self) -> &'static str {
        match self {
            SpanKind::Steady => "steady",
            SpanKind::Transition => "transition",
            SpanKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectRow {
    pub frame: usize,
    pub time_ms: f64,
    pub decision: MotionClass,
    pub confidence: f64,
    pub smoothed: MotionClass,
    pub prompt: MotionClass,
    pub span: SpanKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InspectOptions {
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
    /// Restrict output to one transition (index into the labeling).
    pub transition: Option<usize>,
    /// Frames of context on each side of the selected transition.
    pub margin_frames: usize,
}

fn prompt_at(timeline: &PromptTimeline, t_ms: f64) -> MotionClass {
    timeline
        .entries
        .iter()
        .rev()
        .find(|e| e.start_s * 1000.0 <= t_ms)
        .unwrap_or(&timeline.entries[0])
        .class
}

pub fn inspect(
    model: &ClassifierModel,
    recording: &Recording,
    config: &ExperimentConfig,
    options: &InspectOptions,
) -> Result<Vec<InspectRow>> {
    let prepared = prepare_recording(recording, config)?;
    if prepared.series.is_empty() {
        return Err(Error::Evaluation("recording is shorter than one frame".into()));
    }
    let raw = model.predict_stream(&prepared.series)?;
    let smoothed = majority_vote(&raw, config.postprocess.mv_window)?;
    let labeling = find_steady_states(&smoothed, &recording.timeline, config.postprocess.mv_delay_frames)?;
    let mut kinds = vec![SpanKind::None; raw.len()];
    for s in &labeling.steady {
        kinds[s.start_frame..s.end_frame].fill(SpanKind::Steady);
    }
    for t in &labeling.transitions {
        kinds[t.start_frame..t.end_frame].fill(SpanKind::Transition);
    }
    let timeline = &recording.timeline;

    if let Some(n) = options.transition {
        let t = labeling.transitions.get(n).ok_or_else(|| {
            Error::param(format!(
                "transition {n} does not exist ({} were found)",
                labeling.transitions.len()
            ))
        })?;
        let lo = t.start_frame.saturating_sub(options.margin_frames);
        let hi = (t.end_frame + options.margin_frames).min(raw.len());
        return Ok((lo..hi)
            .map(|i| row(i, raw.times_ms[i], &raw, &smoothed, i, prompt_at(timeline, raw.times_ms[i]), kinds[i]))
            .collect());
    }

    let fs = recording.sample_rate;
    let s0 = options.start_s.map_or(0, |s| (s * fs).round().max(0.0) as usize);
    let s1 = options
        .end_s
        .map_or(recording.len(), |s| ((s * fs).round().max(0.0) as usize).min(recording.len()));
    if s0 == 0 && s1 == recording.len() {
        return Ok((0..raw.len())
            .map(|i| row(i, raw.times_ms[i], &raw, &smoothed, i, prompt_at(timeline, raw.times_ms[i]), kinds[i]))
            .collect());
    }
    if s1 <= s0 {
        return Err(Error::param("slice end must come after its start"));
    }
    let spec = prepared.series.spec;
    let s = &config.signal;
    let filtered = apply_notch_bank_with(recording, &s.notch_centers, s.notch_order, s.notch_half_width)?;
    let slice: Vec<Vec<f64>> = filtered.samples.iter().map(|c| c[s0..s1].to_vec()).collect();
    let count = spec.frame_count(s1 - s0);
    let decisions = (0..count)
        .map(|i| model.predict(&frame_features(&slice, spec.frame(i), config.thresholds())?))
        .collect::<Result<Vec<_>>>()?;
    let clock = FrameClock { spec, sample_rate: fs };
    let local = DecisionStream::from_decisions(decisions, model.classes().to_vec(), clock);
    let local_smoothed = majority_vote(&local, config.postprocess.mv_window)?;
    let offset_ms = s0 as f64 * 1000.0 / fs;
    Ok((0..count)
        .map(|i| {
            let t = local.times_ms[i] + offset_ms;
            // span kind of the latest full-recording decision not after t
            let full = raw.times_ms.partition_point(|&x| x <= t);
            let kind = if full == 0 { SpanKind::None } else { kinds[full - 1] };
            row(i, t, &local, &local_smoothed, i, prompt_at(timeline, t), kind)
        })
        .collect())
}

fn row(
    frame: usize,
    time_ms: f64,
    raw: &DecisionStream,
    smoothed: &DecisionStream,
    i: usize,
    prompt: MotionClass,
    span: SpanKind,
) -> InspectRow {
    InspectRow {
        frame,
        time_ms,
        decision: raw.decisions[i].class,
        confidence: raw.decisions[i].confidence,
        smoothed: smoothed.decisions[i].class,
        prompt,
        span,
    }
}

pub fn write_csv<W: Write>(rows: &[InspectRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "frame,time_ms,decision,confidence,smoothed,prompt,span")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.frame,
            r.time_ms,
            r.decision,
            r.confidence,
            r.smoothed,
            r.prompt,
            r.span.name()
        )?;
    }
    w.flush()
}
