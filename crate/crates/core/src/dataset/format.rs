//! Text container for recordings, plus the manifest written next to a
//! generated dataset.
//!
//! ```text
//! myoeval-recording
//! version=1
//! sample_rate=1000
//! channel_count=8
//! kind=continuous-test        (or: kind=training-repetition + set=N)
//! prompt_duration=3
//! [timeline]
//! 0,NM
//! 3,WF
//! [data]
//! -1.234,0.5,...              (one row per sample, one column per channel)
//! ```
//!
//! Numbers are written in shortest round-trip decimal form, so reading a
//! written file reproduces every field exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MotionClass, PromptEntry, PromptTimeline, Recording, RecordingKind};
use crate::error::{Error, Result};

pub const MAGIC: &str = "myoeval-recording";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_recording_to<W: Write>(rec: &Recording, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "version={FORMAT_VERSION}")?;
    writeln!(w, "sample_rate={}", rec.sample_rate)?;
    writeln!(w, "channel_count={}", rec.channel_count())?;
    match rec.kind {
        RecordingKind::TrainingRepetition { set } => {
            writeln!(w, "kind=training-repetition")?;
            writeln!(w, "set={set}")?;
        }
        RecordingKind::ContinuousTest => writeln!(w, "kind=continuous-test")?,
    }
    writeln!(w, "prompt_duration={}", rec.timeline.prompt_duration)?;
    writeln!(w, "[timeline]")?;
    for e in &rec.timeline.entries {
        writeln!(w, "{},{}", e.start_s, e.class)?;
    }
    writeln!(w, "[data]")?;
    let mut line = String::new();
    for t in 0..rec.len() {
        line.clear();
        for (ch, column) in rec.samples.iter().enumerate() {
            if ch > 0 {
                line.push(',');
            }
            use std::fmt::Write as _;
            let _ = write!(line, "{}", column[t]);
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn write_recording(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_recording_to(rec, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_recording(BufReader::new(file))
}

#[derive(PartialEq)]
enum Section {
    Header,
    Timeline,
    Data,
}

pub fn parse_recording<R: BufRead>(reader: R) -> Result<Recording> {
    let mut section = Section::Header;
    let mut version = None;
    let mut sample_rate = None;
    let mut channel_count: Option<usize> = None;
    let mut kind_name: Option<String> = None;
    let mut set = None;
    let mut prompt_duration = None;
    let mut entries = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut saw_magic = false;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::format(lineno, "file", e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_magic {
            if line != MAGIC {
                return Err(Error::format(lineno, "magic", format!("expected `{MAGIC}`")));
            }
            saw_magic = true;
            continue;
        }
        match line {
            "[timeline]" => {
                if section != Section::Header {
                    return Err(Error::format(lineno, "timeline", "section out of order"));
                }
                section = Section::Timeline;
                continue;
            }
            "[data]" => {
                if section != Section::Timeline {
                    return Err(Error::format(lineno, "data", "section out of order"));
                }
                let n = channel_count
                    .ok_or_else(|| Error::format(lineno, "channel_count", "missing"))?;
                samples = vec![Vec::new(); n];
                section = Section::Data;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Header => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| Error::format(lineno, "header", "expected key=value"))?;
                let value = value.trim();
                match key.trim() {
                    "version" => version = Some(parse_num::<u32>(value, lineno, "version")?),
                    "sample_rate" => {
                        sample_rate = Some(parse_num::<f64>(value, lineno, "sample_rate")?)
                    }
                    "channel_count" => {
                        let n = parse_num::<usize>(value, lineno, "channel_count")?;
                        if n == 0 {
                            return Err(Error::format(lineno, "channel_count", "must be ≥ 1"));
                        }
                        channel_count = Some(n)
                    }
                    "kind" => kind_name = Some(value.to_string()),
                    "set" => set = Some(parse_num::<usize>(value, lineno, "set")?),
                    "prompt_duration" => {
                        prompt_duration = Some(parse_num::<f64>(value, lineno, "prompt_duration")?)
                    }
                    other => {
                        return Err(Error::format(lineno, other, "unknown header field"));
                    }
                }
            }
            Section::Timeline => {
                let (t, class) = line
                    .split_once(',')
                    .ok_or_else(|| Error::format(lineno, "timeline", "expected start_s,class"))?;
                let start_s = parse_num::<f64>(t, lineno, "timeline.start_s")?;
                let class: MotionClass = class
                    .parse()
                    .map_err(|_| Error::format(lineno, "timeline.class", format!("`{class}`")))?;
                if let Some(prev) = entries.last() {
                    let prev: &PromptEntry = prev;
                    if !(start_s > prev.start_s) {
                        return Err(Error::format(
                            lineno,
                            "timeline.start_s",
                            "start times must be strictly increasing",
                        ));
                    }
                    if prev.class == class {
                        return Err(Error::format(
                            lineno,
                            "timeline.class",
                            "consecutive prompts must differ",
                        ));
                    }
                }
                entries.push(PromptEntry { start_s, class });
            }
            Section::Data => {
                let mut n = 0;
                for (ch, value) in line.split(',').enumerate() {
                    if ch >= samples.len() {
                        return Err(Error::format(
                            lineno,
                            "data",
                            format!("more than {} channel values", samples.len()),
                        ));
                    }
                    samples[ch].push(parse_num::<f64>(value, lineno, "data")?);
                    n += 1;
                }
                if n != samples.len() {
                    return Err(Error::format(
                        lineno,
                        "data",
                        format!("expected {} channel values, found {n}", samples.len()),
                    ));
                }
            }
        }
    }

    let end = 0;
    if !saw_magic {
        return Err(Error::format(end, "magic", "empty file"));
    }
    if section != Section::Data {
        return Err(Error::format(end, "data", "missing [data] section"));
    }
    match version {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(Error::format(end, "version", format!("unsupported {v}"))),
        None => return Err(Error::format(end, "version", "missing")),
    }
    let sample_rate = sample_rate.ok_or_else(|| Error::format(end, "sample_rate", "missing"))?;
    let prompt_duration =
        prompt_duration.ok_or_else(|| Error::format(end, "prompt_duration", "missing"))?;
    let kind = match kind_name.as_deref() {
        Some("continuous-test") => RecordingKind::ContinuousTest,
        Some("training-repetition") => RecordingKind::TrainingRepetition {
            set: set.ok_or_else(|| Error::format(end, "set", "missing for training repetition"))?,
        },
        Some(other) => return Err(Error::format(end, "kind", format!("unknown `{other}`"))),
        None => return Err(Error::format(end, "kind", "missing")),
    };
    let timeline = PromptTimeline { entries, prompt_duration };
    timeline
        .validate()
        .map_err(|e| Error::format(end, "timeline", e.to_string()))?;
    Recording::new(samples, sample_rate, timeline, kind)
        .map_err(|e| Error::format(end, "recording", e.to_string()))
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, field: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(line, field, format!("cannot parse `{}`", s.trim())))
}

/// Index of a generated dataset, stored as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: usize,
    /// Paths relative to the manifest directory.
    pub training: Vec<PathBuf>,
    pub tests: Vec<PathBuf>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(e.line(), "manifest", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
