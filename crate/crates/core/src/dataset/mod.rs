//! Recordings, prompt timelines and the seven motion classes.

pub mod format;
pub mod generator;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{read_recording, write_recording, Manifest, SubjectEntry};
pub use generator::{
    generate_continuous_test, generate_training_set, GeneratorSettings, MsDistribution,
    SyntheticSubjectProfile,
};

/// Default acquisition settings for the reference configuration.
pub const DEFAULT_CHANNELS: usize = 8;
pub const DEFAULT_SAMPLE_RATE: f64 = 1000.0;
pub const DEFAULT_PROMPT_DURATION_S: f64 = 3.0;

/// One of the seven contraction classes. `NM` is the only rest class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MotionClass {
    NM,
    WF,
    WE,
    WP,
    WS,
    CG,
    HO,
}

impl MotionClass {
    pub const COUNT: usize = 7;

    pub const ALL: [MotionClass; 7] = [
        MotionClass::NM,
        MotionClass::WF,
        MotionClass::WE,
        MotionClass::WP,
        MotionClass::WS,
        MotionClass::CG,
        MotionClass::HO,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        Self::ALL.get(ordinal).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionClass::NM => "NM",
            MotionClass::WF => "WF",
            MotionClass::WE => "WE",
            MotionClass::WP => "WP",
            MotionClass::WS => "WS",
            MotionClass::CG => "CG",
            MotionClass::HO => "HO",
        }
    }

    pub fn is_rest(self) -> bool {
        self == MotionClass::NM
    }

    pub fn is_active(self) -> bool {
        !self.is_rest()
    }
}

impl fmt::Display for MotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown motion class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptEntry {
    pub start_s: f64,
    pub class: MotionClass,
}

/// Ordered prompts shown to the user. Each prompt lasts until the next one
/// starts; the last lasts `prompt_duration` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTimeline {
    pub entries: Vec<PromptEntry>,
    pub prompt_duration: f64,
}

impl PromptTimeline {
    pub fn new(entries: Vec<PromptEntry>, prompt_duration: f64) -> Result<Self> {
        let timeline = Self {
            entries,
            prompt_duration,
        };
        timeline.validate()?;
        Ok(timeline)
    }

    /// Back-to-back prompts of equal length starting at t = 0.
    pub fn uniform(classes: &[MotionClass], prompt_duration: f64) -> Result<Self> {
        let entries = classes
            .iter()
            .enumerate()
            .map(|(i, &class)| PromptEntry {
                start_s: i as f64 * prompt_duration,
                class,
            })
            .collect();
        Self::new(entries, prompt_duration)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::param("timeline has no prompts"));
        }
        if !(self.prompt_duration > 0.0) || !self.prompt_duration.is_finite() {
            return Err(Error::param("prompt duration must be positive"));
        }
        for pair in self.entries.windows(2) {
            if !(pair[1].start_s > pair[0].start_s) {
                return Err(Error::param(format!(
                    "timeline start times not strictly increasing ({} then {})",
                    pair[0].start_s, pair[1].start_s
                )));
            }
            if pair[0].class == pair[1].class {
                return Err(Error::param(format!(
                    "consecutive prompts share class {} at {} s",
                    pair[0].class, pair[1].start_s
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Start of the prompt after `index`, or the end of the last prompt.
    pub fn prompt_end_s(&self, index: usize) -> f64 {
        match self.entries.get(index + 1) {
            Some(next) => next.start_s,
            None => self.entries[index].start_s + self.prompt_duration,
        }
    }

    /// Consecutive `(previous, next)` class pairs.
    pub fn transitions(&self) -> impl Iterator<Item = (MotionClass, MotionClass)> + '_ {
        self.entries.windows(2).map(|w| (w[0].class, w[1].class))
    }

    /// True when every ordered pair of distinct classes occurs exactly once
    /// as a consecutive pair.
    pub fn covers_all_transitions(&self) -> bool {
        let mut seen = [[0u32; MotionClass::COUNT]; MotionClass::COUNT];
        for (a, b) in self.transitions() {
            seen[a.ordinal()][b.ordinal()] += 1;
        }
        (0..MotionClass::COUNT).all(|a| {
            (0..MotionClass::COUNT).all(|b| seen[a][b] == u32::from(a != b))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RecordingKind {
    /// One ramp contraction of a single class; `set` is the repetition set index.
    TrainingRepetition { set: usize },
    ContinuousTest,
}

/// A multichannel recording with its prompt timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    /// `samples[channel][t]`.
    pub samples: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub timeline: PromptTimeline,
    pub kind: RecordingKind,
}

impl Recording {
    pub fn new(
        samples: Vec<Vec<f64>>,
        sample_rate: f64,
        timeline: PromptTimeline,
        kind: RecordingKind,
    ) -> Result<Self> {
        let rec = Self {
            samples,
            sample_rate,
            timeline,
            kind,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::param("recording needs at least one channel"));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::param("sample rate must be positive"));
        }
        let len = self.samples[0].len();
        if let Some((ch, other)) = self
            .samples
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != len)
        {
            return Err(Error::param(format!(
                "channel {ch} has {} samples, channel 0 has {len}",
                other.len()
            )));
        }
        self.timeline.validate()?;
        let duration = self.duration_s();
        if let Some(e) = self
            .timeline
            .entries
            .iter()
            .find(|e| e.start_s < 0.0 || e.start_s > duration)
        {
            return Err(Error::param(format!(
                "prompt at {} s lies outside recording of {duration} s",
                e.start_s
            )));
        }
        Ok(())
    }

    pub fn channel_count(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// Class of a training repetition (its single prompt).
    pub fn primary_class(&self) -> MotionClass {
        self.timeline.entries[0].class
    }
}
