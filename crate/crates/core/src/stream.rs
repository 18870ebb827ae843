//! Decision streams, majority-vote smoothing, and automatic segmentation of
//! a continuous test into labeled steady states and unlabeled transitions.
//!
//! Segmentation runs on the smoothed stream. For prompt `p` of class `c`:
//!
//! * start: first frame at or after the prompt change whose decision is `c`,
//!   searched up to the next prompt change. No such frame means the prompt
//!   is discarded.
//! * end: first frame at or after the next prompt change whose decision is
//!   not `c` (exclusive). If the stream never leaves `c`, the span runs to the
//!   end of the stream.
//! * both are moved back by the majority-vote delay (clamped at 0).
//!
//! Frames between consecutive surviving steady spans form a transition.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classify::Decision;
use crate::dataset::{MotionClass, PromptTimeline};
use crate::dsp::FrameSpec;
use crate::error::{Error, Result};

pub const DEFAULT_MV_WINDOW: usize = 9;
pub const DEFAULT_MV_DELAY_FRAMES: usize = 4;

/// Maps frame ordinals to decision times (end of the frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameClock {
    pub spec: FrameSpec,
    pub sample_rate: f64,
}

impl FrameClock {
    /// Decision time of frame `ordinal` in ms. Defined for any ordinal,
    /// including one past the last frame.
    pub fn time_ms(&self, ordinal: usize) -> f64 {
        (ordinal * self.spec.increment + self.spec.frame_length) as f64 * 1000.0 / self.sample_rate
    }

    pub fn increment_ms(&self) -> f64 {
        self.spec.increment as f64 * 1000.0 / self.sample_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionStream {
    pub decisions: Vec<Decision>,
    /// Classes the scores refer to, in score order.
    pub classes: Vec<MotionClass>,
    pub clock: FrameClock,
    pub times_ms: Vec<f64>,
}

impl DecisionStream {
    pub fn new(
        decisions: Vec<Decision>,
        classes: Vec<MotionClass>,
        spec: FrameSpec,
        sample_rate: f64,
        times_ms: Vec<f64>,
    ) -> Result<Self> {
        if decisions.len() != times_ms.len() {
            return Err(Error::param("one time per decision is required"));
        }
        if times_ms.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("decision times must be strictly increasing"));
        }
        Ok(Self {
            decisions,
            classes,
            clock: FrameClock { spec, sample_rate },
            times_ms,
        })
    }

    /// Stream whose frame `i` is decided at `clock.time_ms(i)`.
    pub fn from_decisions(decisions: Vec<Decision>, classes: Vec<MotionClass>, clock: FrameClock) -> Self {
        let times_ms = (0..decisions.len()).map(|i| clock.time_ms(i)).collect();
        Self {
            decisions,
            classes,
            clock,
            times_ms,
        }
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn labels(&self) -> Vec<MotionClass> {
        self.decisions.iter().map(|d| d.class).collect()
    }

    /// First frame whose decision time is at or after `t_ms`.
    pub fn first_frame_at(&self, t_ms: f64) -> usize {
        self.times_ms.partition_point(|&t| t < t_ms)
    }
}

/// Causal majority vote over the current and previous `window - 1`
/// decisions. Ties go to the tied class decided most recently; the output
/// keeps the scores of the highest-confidence window member of the winning
/// class.
pub fn majority_vote(stream: &DecisionStream, window: usize) -> Result<DecisionStream> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::param(format!(
            "majority-vote window must be odd and ≥ 1, got {window}"
        )));
    }
    let d = &stream.decisions;
    let mut out = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let lo = (i + 1).saturating_sub(window);
        let mut counts = [0usize; MotionClass::COUNT];
        let mut last_seen = [0usize; MotionClass::COUNT];
        for (j, dec) in d.iter().enumerate().take(i + 1).skip(lo) {
            counts[dec.class.ordinal()] += 1;
            last_seen[dec.class.ordinal()] = j;
        }
        let top = *counts.iter().max().expect("non-empty window");
        let winner = (0..MotionClass::COUNT)
            .filter(|&c| counts[c] == top)
            .max_by_key(|&c| last_seen[c])
            .expect("winner exists");
        let carrier = (lo..=i)
            .rev()
            .filter(|&j| d[j].class.ordinal() == winner)
            .fold(None::<usize>, |best, j| match best {
                Some(b) if d[b].confidence >= d[j].confidence => Some(b),
                _ => Some(j),
            })
            .expect("winner occurs in window");
        out.push(d[carrier].clone());
    }
    Ok(DecisionStream {
        decisions: out,
        ..stream.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransitionGroup {
    R2A,
    A2R,
    A2A,
}

impl TransitionGroup {
    pub const ALL: [TransitionGroup; 3] = [TransitionGroup::R2A, TransitionGroup::A2R, TransitionGroup::A2A];

    /// Only meaningful for `from != to`.
    pub fn of(from: MotionClass, to: MotionClass) -> Self {
        if from.is_rest() {
            TransitionGroup::R2A
        } else if to.is_rest() {
            TransitionGroup::A2R
        } else {
            TransitionGroup::A2A
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransitionGroup::R2A => "R2A",
            TransitionGroup::A2R => "A2R",
            TransitionGroup::A2A => "A2A",
        }
    }
}

impl fmt::Display for TransitionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteadyStateSpan {
    pub class: MotionClass,
    pub start_frame: usize,
    /// Exclusive.
    pub end_frame: usize,
    pub prompt_index: usize,
}

impl SteadyStateSpan {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame <= self.start_frame
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionSpan {
    pub from_class: MotionClass,
    pub to_class: MotionClass,
    pub start_frame: usize,
    /// Exclusive; equals `start_frame` when the steady spans abut.
    pub end_frame: usize,
    pub group: TransitionGroup,
    pub from_prompt: usize,
    pub to_prompt: usize,
    /// Prompt whose onset the delays are measured from (the first change
    /// after `from_prompt`).
    pub change_prompt: usize,
}

impl TransitionSpan {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame == self.start_frame
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedTransition {
    pub from_prompt: usize,
    pub to_prompt: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLabeling {
    pub steady: Vec<SteadyStateSpan>,
    pub transitions: Vec<TransitionSpan>,
    pub discarded_prompts: Vec<usize>,
    /// Bridging transitions that could not be formed (equal neighbouring
    /// classes after a discard).
    pub dropped: Vec<DroppedTransition>,
    pub prompt_count: usize,
    pub frame_count: usize,
    pub clock: FrameClock,
}

impl SegmentLabeling {
    /// Prompt changes that did not produce an emitted transition.
    pub fn dropped_transition_count(&self) -> usize {
        self.prompt_count.saturating_sub(1) - self.transitions.len()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind,from_class,to_class,start_frame,end_frame,group,prompt")?;
        let mut rows: Vec<(usize, u8, String)> = Vec::new();
        for s in &self.steady {
            rows.push((
                s.start_frame,
                0,
                format!("steady,{},{},{},{},,{}", s.class, s.class, s.start_frame, s.end_frame, s.prompt_index),
            ));
        }
        for t in &self.transitions {
            rows.push((
                t.start_frame,
                1,
                format!(
                    "transition,{},{},{},{},{},{}",
                    t.from_class, t.to_class, t.start_frame, t.end_frame, t.group, t.to_prompt
                ),
            ));
        }
        rows.sort_by_key(|r| (r.0, r.1));
        for (_, _, line) in rows {
            writeln!(w, "{line}")?;
        }
        for p in &self.discarded_prompts {
            writeln!(w, "discarded,,,,,,{p}")?;
        }
        Ok(())
    }
}

/// Segments a smoothed stream against its prompt timeline.
pub fn find_steady_states(
    smoothed: &DecisionStream,
    timeline: &PromptTimeline,
    mv_delay_frames: usize,
) -> Result<SegmentLabeling> {
    timeline.validate()?;
    let n = smoothed.len();
    if n == 0 {
        return Err(Error::param("cannot segment an empty decision stream"));
    }
    let last_time = *smoothed.times_ms.last().expect("non-empty");
    if let Some(last) = timeline.entries.last() {
        if last.start_s * 1000.0 > last_time {
            return Err(Error::param(format!(
                "timeline prompt at {} s starts after the last decision ({last_time} ms)",
                last.start_s
            )));
        }
    }
    if timeline.entries[0].start_s * 1000.0 < -1e-9 {
        return Err(Error::param("timeline starts before the stream"));
    }

    let labels = smoothed.labels();
    let mut discarded = Vec::new();
    let mut kept: Vec<SteadyStateSpan> = Vec::new();
    for (p, entry) in timeline.entries.iter().enumerate() {
        let class = entry.class;
        let lo = smoothed.first_frame_at(entry.start_s * 1000.0);
        let hi = smoothed.first_frame_at(timeline.prompt_end_s(p) * 1000.0);
        let Some(start_raw) = (lo..hi).find(|&i| labels[i] == class) else {
            discarded.push(p);
            continue;
        };
        let end = match (hi.max(start_raw + 1)..n).find(|&i| labels[i] != class) {
            Some(i) => i.saturating_sub(mv_delay_frames),
            None => n,
        };
        let cand = SteadyStateSpan {
            class,
            start_frame: start_raw.saturating_sub(mv_delay_frames),
            end_frame: end,
            prompt_index: p,
        };
        while let Some(last) = kept.last_mut() {
            if last.end_frame > cand.start_frame {
                last.end_frame = cand.start_frame;
            }
            if last.is_empty() {
                discarded.push(last.prompt_index);
                kept.pop();
                continue;
            }
            break;
        }
        if cand.is_empty() {
            discarded.push(p);
        } else {
            kept.push(cand);
        }
    }
    discarded.sort_unstable();

    let mut transitions = Vec::new();
    let mut dropped = Vec::new();
    for pair in kept.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.class == b.class {
            dropped.push(DroppedTransition {
                from_prompt: a.prompt_index,
                to_prompt: b.prompt_index,
                reason: format!("neighbouring steady states share class {}", a.class),
            });
            continue;
        }
        transitions.push(TransitionSpan {
            from_class: a.class,
            to_class: b.class,
            start_frame: a.end_frame,
            end_frame: b.start_frame,
            group: TransitionGroup::of(a.class, b.class),
            from_prompt: a.prompt_index,
            to_prompt: b.prompt_index,
            change_prompt: a.prompt_index + 1,
        });
    }
    Ok(SegmentLabeling {
        steady: kept,
        transitions,
        discarded_prompts: discarded,
        dropped,
        prompt_count: timeline.len(),
        frame_count: n,
        clock: smoothed.clock,
    })
}

/// Prompt-relative timing of one transition, in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionDelays {
    pub t_offset_ms: f64,
    pub t_onset_ms: f64,
    pub t_transition_ms: f64,
}

/// Offset, onset and duration for every transition of `labeling`, in order.
pub fn compute_delays(labeling: &SegmentLabeling, timeline: &PromptTimeline) -> Vec<TransitionDelays> {
    labeling
        .transitions
        .iter()
        .map(|t| {
            let change_ms = timeline.entries[t.change_prompt].start_s * 1000.0;
            let t_offset_ms = labeling.clock.time_ms(t.start_frame) - change_ms;
            let t_onset_ms = labeling.clock.time_ms(t.end_frame) - change_ms;
            TransitionDelays {
                t_offset_ms,
                t_onset_ms,
                t_transition_ms: t_onset_ms - t_offset_ms,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MotionClass::*;
    use proptest::prelude::*;

    fn clock() -> FrameClock {
        FrameClock {
            spec: FrameSpec::DEFAULT,
            sample_rate: 1000.0,
        }
    }

    fn dec(class: MotionClass, confidence: f64) -> Decision {
        let mut scores = vec![0.0; 7];
        scores[class.ordinal()] = confidence;
        scores[(class.ordinal() + 1) % 7] = 1.0 - confidence;
        Decision { class, confidence, scores }
    }

    pub(crate) fn stream_of(classes: &[MotionClass]) -> DecisionStream {
        DecisionStream::from_decisions(
            classes.iter().map(|&c| dec(c, 0.9)).collect(),
            MotionClass::ALL.to_vec(),
            clock(),
        )
    }

    #[test]
    fn vote_absorbs_single_outlier() {
        let s = stream_of(&[WF, WF, WF, WE, WF, WF, WF, WF, WF, WF]);
        let v = majority_vote(&s, 9).unwrap();
        assert!(v.labels()[8..].iter().all(|&c| c == WF));
    }

    #[test]
    fn vote_window_one_is_identity() {
        let s = stream_of(&[NM, WF, WE, WF, HO, CG]);
        assert_eq!(majority_vote(&s, 1).unwrap(), s);
    }

    #[test]
    fn vote_counts_window() {
        let mut c = vec![WF; 5];
        c.extend(vec![WE; 5]);
        let v = majority_vote(&stream_of(&c), 9).unwrap();
        // frames 1..=9 hold WF×4, WE×5
        assert_eq!(v.labels()[9], WE);
        // frame 8 (0..=8): WF×5, WE×4
        assert_eq!(v.labels()[8], WF);
    }

    #[test]
    fn vote_tie_goes_to_most_recent() {
        // window 3 at index 1 sees [WF, WE] → tie, WE most recent
        let v = majority_vote(&stream_of(&[WF, WE, NM]), 3).unwrap();
        assert_eq!(v.labels()[1], WE);
        // index 2 sees WF, WE, NM → three-way tie → NM
        assert_eq!(v.labels()[2], NM);
    }

    #[test]
    fn vote_carries_highest_confidence_member() {
        let mut s = stream_of(&[WF, WF, WE]);
        s.decisions[0] = dec(WF, 0.99);
        let v = majority_vote(&s, 3).unwrap();
        assert_eq!(v.decisions[2], dec(WF, 0.99));
    }

    #[test]
    fn vote_rejects_even_window() {
        assert!(majority_vote(&stream_of(&[NM]), 4).is_err());
        assert!(majority_vote(&stream_of(&[NM]), 0).is_err());
    }

    /// Frames per 3 s prompt at 160/16: first frame with time ≥ t.
    fn ideal_stream(prompts: &[MotionClass], prompt_s: f64) -> (DecisionStream, PromptTimeline) {
        let tl = PromptTimeline::uniform(prompts, prompt_s).unwrap();
        let samples = (prompts.len() as f64 * prompt_s * 1000.0) as usize;
        let n = FrameSpec::DEFAULT.frame_count(samples);
        let c = clock();
        let labels: Vec<MotionClass> = (0..n)
            .map(|i| {
                let t = c.time_ms(i) / 1000.0;
                let p = tl.entries.iter().rposition(|e| e.start_s <= t).unwrap();
                prompts[p]
            })
            .collect();
        (stream_of(&labels), tl)
    }

    #[test]
    fn ideal_classifier_gives_abutting_spans() {
        let (s, tl) = ideal_stream(&[NM, WF, NM, WE], 3.0);
        let lab = find_steady_states(&s, &tl, 4).unwrap();
        assert_eq!(lab.steady.len(), 4);
        assert!(lab.discarded_prompts.is_empty());
        for (p, span) in lab.steady.iter().enumerate() {
            let first = s.first_frame_at(tl.entries[p].start_s * 1000.0);
            assert_eq!(span.start_frame, first.saturating_sub(4));
            assert_eq!(span.class, tl.entries[p].class);
        }
        assert_eq!(lab.transitions.len(), 3);
        assert!(lab.transitions.iter().all(|t| t.is_empty()));
        let groups: Vec<_> = lab.transitions.iter().map(|t| t.group).collect();
        assert_eq!(groups, vec![TransitionGroup::R2A, TransitionGroup::A2R, TransitionGroup::R2A]);
        for d in compute_delays(&lab, &tl) {
            assert_eq!(d.t_transition_ms, 0.0);
        }
    }

    #[test]
    fn absent_class_is_discarded_and_bridged() {
        // prompts NM, WF, WE, NM; the stream never shows WF
        let (mut s, tl) = ideal_stream(&[NM, WF, WE, NM], 1.0);
        for d in s.decisions.iter_mut() {
            if d.class == WF {
                *d = dec(NM, 0.9);
            }
        }
        let lab = find_steady_states(&s, &tl, 4).unwrap();
        assert_eq!(lab.discarded_prompts, vec![1]);
        let classes: Vec<_> = lab.steady.iter().map(|sp| sp.class).collect();
        assert_eq!(classes, vec![NM, WE, NM]);
        // NM runs until WE appears at the first frame of prompt 2
        let we_first = s.first_frame_at(2000.0);
        assert_eq!(lab.steady[0].start_frame, 0);
        assert_eq!(lab.steady[0].end_frame, we_first - 4);
        assert_eq!(lab.steady[1].start_frame, we_first - 4);
        let t0 = lab.transitions[0];
        assert_eq!((t0.from_class, t0.to_class, t0.group), (NM, WE, TransitionGroup::R2A));
        assert!(t0.is_empty());
        assert_eq!(lab.transitions.len(), 2);
        assert_eq!(lab.dropped_transition_count(), 1);
    }

    #[test]
    fn discarded_first_prompt_drops_its_transition() {
        let (mut s, tl) = ideal_stream(&[WF, NM, WE], 1.0);
        for d in s.decisions.iter_mut() {
            if d.class == WF {
                *d = dec(HO, 0.9);
            }
        }
        let lab = find_steady_states(&s, &tl, 4).unwrap();
        assert_eq!(lab.discarded_prompts, vec![0]);
        assert_eq!(lab.transitions.len(), 1);
        assert_eq!(lab.transitions[0].from_class, NM);
        assert_eq!(lab.transitions.len() + lab.dropped_transition_count(), 2);
    }

    #[test]
    fn timeline_beyond_stream_is_error() {
        let (s, _) = ideal_stream(&[NM, WF], 1.0);
        let tl = PromptTimeline::uniform(&[NM, WF, NM], 5.0).unwrap();
        assert!(matches!(find_steady_states(&s, &tl, 4), Err(Error::Parameter(_))));
    }

    #[test]
    fn delays_from_constructed_labeling() {
        let c = FrameClock {
            spec: FrameSpec::new(16, 16).unwrap(),
            sample_rate: 1000.0,
        };
        // prompt change coincides with the decision time of frame 6972
        let change_s = c.time_ms(6972) / 1000.0;
        let tl = PromptTimeline::new(
            vec![
                crate::dataset::PromptEntry { start_s: 0.0, class: WF },
                crate::dataset::PromptEntry { start_s: change_s, class: WE },
            ],
            3.0,
        )
        .unwrap();
        let lab = SegmentLabeling {
            steady: vec![],
            transitions: vec![TransitionSpan {
                from_class: WF,
                to_class: WE,
                start_frame: 6982,
                end_frame: 7012,
                group: TransitionGroup::A2A,
                from_prompt: 0,
                to_prompt: 1,
                change_prompt: 1,
            }],
            discarded_prompts: vec![],
            dropped: vec![],
            prompt_count: 2,
            frame_count: 8000,
            clock: c,
        };
        let d = compute_delays(&lab, &tl)[0];
        assert_eq!(d.t_offset_ms, 160.0);
        assert_eq!(d.t_onset_ms, 640.0);
        assert_eq!(d.t_transition_ms, 480.0);
    }

    #[test]
    fn group_rule() {
        assert_eq!(TransitionGroup::of(NM, WF), TransitionGroup::R2A);
        assert_eq!(TransitionGroup::of(WF, NM), TransitionGroup::A2R);
        assert_eq!(TransitionGroup::of(WF, HO), TransitionGroup::A2A);
    }

    fn class_strategy() -> impl Strategy<Value = MotionClass> {
        (0usize..7).prop_map(|i| MotionClass::ALL[i])
    }

    proptest! {
        #[test]
        fn vote_output_comes_from_window(
            classes in proptest::collection::vec(class_strategy(), 1..80),
            half in 0usize..6,
        ) {
            let w = 2 * half + 1;
            let s = stream_of(&classes);
            let v = majority_vote(&s, w).unwrap();
            prop_assert_eq!(v.len(), s.len());
            for i in 0..classes.len() {
                let lo = (i + 1).saturating_sub(w);
                prop_assert!(classes[lo..=i].contains(&v.labels()[i]));
            }
        }

        #[test]
        fn labeling_tiles_frame_axis(
            // blocks of (class, run length) make a noisy but structured stream
            runs in proptest::collection::vec((class_strategy(), 1usize..60), 1..30),
            prompts in proptest::collection::vec(class_strategy(), 2..12),
        ) {
            let mut labels: Vec<MotionClass> = runs.iter().flat_map(|&(c, n)| std::iter::repeat_n(c, n)).collect();
            let mut ps = prompts.clone();
            ps.dedup();
            prop_assume!(ps.len() >= 2);
            let clk = clock();
            let prompt_s = 0.5;
            let needed = FrameSpec::DEFAULT.frame_count((ps.len() as f64 * prompt_s * 1000.0) as usize);
            while labels.len() < needed {
                labels.extend_from_slice(&labels.clone());
            }
            labels.truncate(needed);
            let s = stream_of(&labels);
            let tl = PromptTimeline::uniform(&ps, prompt_s).unwrap();
            let lab = find_steady_states(&majority_vote(&s, 9).unwrap(), &tl, 4).unwrap();

            let mut spans: Vec<(usize, usize)> = lab.steady.iter().map(|s| (s.start_frame, s.end_frame)).collect();
            for t in &lab.transitions {
                if !t.is_empty() { spans.push((t.start_frame, t.end_frame)); }
            }
            spans.sort();
            for w in spans.windows(2) {
                prop_assert!(w[0].1 <= w[1].0, "overlap {:?}", w);
            }
            // transitions exactly fill gaps between consecutive steady spans
            for (pair, t) in lab.steady.windows(2).filter(|p| p[0].class != p[1].class).zip(&lab.transitions) {
                prop_assert_eq!(t.start_frame, pair[0].end_frame);
                prop_assert_eq!(t.end_frame, pair[1].start_frame);
                prop_assert_ne!(t.from_class, t.to_class);
                prop_assert_eq!(t.group, TransitionGroup::of(t.from_class, t.to_class));
            }
            for sp in &lab.steady {
                prop_assert!(sp.start_frame < sp.end_frame && sp.end_frame <= lab.frame_count);
                prop_assert_eq!(sp.class, tl.entries[sp.prompt_index].class);
            }
            prop_assert_eq!(lab.steady.len() + lab.discarded_prompts.len(), ps.len());
            prop_assert_eq!(lab.transitions.len() + lab.dropped_transition_count(), ps.len() - 1);
            for (d, t) in compute_delays(&lab, &tl).iter().zip(&lab.transitions) {
                prop_assert_eq!(d.t_transition_ms, d.t_onset_ms - d.t_offset_ms);
                prop_assert_eq!(d.t_transition_ms, t.len() as f64 * clk.increment_ms());
            }
        }
    }
}
