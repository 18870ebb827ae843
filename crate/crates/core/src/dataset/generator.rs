//! Synthetic subjects standing in for recorded participants.
//!
//! Each channel is zero-mean Gaussian noise whose standard deviation follows
//! a piecewise-linear gain envelope plus a noise floor. The envelope gain is
//! further modulated by a slow log-normal wobble per channel, so that frame
//! features vary the way contraction force does. Training repetitions ramp
//! from rest-level activity up to the class gains; continuous tests change
//! class every prompt after a sampled reaction delay, with a linear ramp of
//! sampled duration. Active-to-active changes release part of the way towards
//! rest, hold there briefly, then engage the new class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    MotionClass, PromptTimeline, Recording, RecordingKind, DEFAULT_CHANNELS,
    DEFAULT_SAMPLE_RATE,
};
use crate::error::{Error, Result};

/// Quantization step applied to generated samples (arbitrary units).
pub const SAMPLE_RESOLUTION: f64 = 1e-3;

/// Log-scale standard deviation of an active class's per-channel gains.
pub const CLASS_GAIN_SPREAD: f64 = 0.5;
/// Log-scale standard deviation of the overall level of each active class.
pub const CLASS_LEVEL_SPREAD: f64 = 0.1;

/// Default release dip depth for active-to-active changes.
pub const DEFAULT_RELEASE_DEPTH: f64 = 0.5;
/// Default fraction of a training repetition spent ramping up.
pub const DEFAULT_TRAINING_RAMP_FRACTION: f64 = 0.5;
/// Default log-scale spread of the slow gain wobble.
pub const DEFAULT_GAIN_FLUCTUATION: f64 = 0.25;
/// Default correlation time of the gain wobble.
pub const DEFAULT_FLUCTUATION_MS: f64 = 150.0;

const STREAM_TIMELINE: u64 = 1;
const STREAM_TIMING: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_PROFILE: u64 = 4;
const STREAM_WOBBLE: u64 = 5;

/// Mean and spread (standard deviation) of a millisecond-valued quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsDistribution {
    pub mean_ms: f64,
    pub spread_ms: f64,
}

impl MsDistribution {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let normal = Normal::new(self.mean_ms, self.spread_ms).expect("validated spread");
        let lo = self.mean_ms * 0.25;
        let hi = self.mean_ms + 3.0 * self.spread_ms;
        normal.sample(rng).clamp(lo, hi)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.mean_ms >= 0.0 && self.spread_ms >= 0.0)
            || !self.mean_ms.is_finite()
            || !self.spread_ms.is_finite()
        {
            return Err(Error::param(format!(
                "{name}: mean and spread must be finite and non-negative"
            )));
        }
        Ok(())
    }
}

/// Subject-independent generator parameters. Gains and noise floors are
/// drawn per subject; everything here is shared by all subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSettings {
    pub reaction_delay: MsDistribution,
    pub ramp_duration: MsDistribution,
    pub release_hold: MsDistribution,
    pub release_depth: f64,
    pub training_ramp_fraction: f64,
    pub gain_fluctuation: f64,
    pub fluctuation_ms: f64,
    pub powerline_amplitude: f64,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        Self {
            reaction_delay: MsDistribution {
                mean_ms: 300.0,
                spread_ms: 60.0,
            },
            ramp_duration: MsDistribution {
                mean_ms: 100.0,
                spread_ms: 30.0,
            },
            release_hold: MsDistribution {
                mean_ms: 300.0,
                spread_ms: 50.0,
            },
            release_depth: DEFAULT_RELEASE_DEPTH,
            training_ramp_fraction: DEFAULT_TRAINING_RAMP_FRACTION,
            gain_fluctuation: DEFAULT_GAIN_FLUCTUATION,
            fluctuation_ms: DEFAULT_FLUCTUATION_MS,
            powerline_amplitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubjectProfile {
    pub channel_count: usize,
    pub sample_rate: f64,
    /// `class_gains[class.ordinal()][channel]`.
    pub class_gains: Vec<Vec<f64>>,
    /// Per-class additive noise floor.
    pub noise_floor: Vec<f64>,
    pub reaction_delay: MsDistribution,
    pub ramp_duration: MsDistribution,
    /// Time spent at the bottom of the release dip.
    pub release_hold: MsDistribution,
    /// Depth of the release dip during active-to-active changes, as a
    /// fraction of the way from rest level to the mean of both active
    /// levels. Must be in (0, 1]; 1 means no dip.
    pub release_depth: f64,
    /// Fraction of a training repetition spent ramping up.
    pub training_ramp_fraction: f64,
    /// Amplitude of injected 60/180/300 Hz interference (0 disables it).
    pub powerline_amplitude: f64,
    /// Log-scale standard deviation of the slow per-channel gain wobble
    /// (0 disables it).
    pub gain_fluctuation: f64,
    /// Correlation time of the gain wobble.
    pub fluctuation_ms: f64,
    pub seed: u64,
}

impl SyntheticSubjectProfile {
    /// Random subject with the reference acquisition settings.
    pub fn sample(seed: u64) -> Self {
        Self::sample_with(seed, DEFAULT_CHANNELS, DEFAULT_SAMPLE_RATE)
    }

    pub fn sample_with(seed: u64, channel_count: usize, sample_rate: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_PROFILE);
        // Active classes differ mainly in how activity is spread across
        // channels; their overall (RMS) level varies only slightly.
        let base = rng.random_range(8.0..20.0);
        let pattern = LogNormal::new(0.0, CLASS_GAIN_SPREAD).expect("valid spread");
        let level = LogNormal::new(0.0, CLASS_LEVEL_SPREAD).expect("valid spread");
        let class_gains = MotionClass::ALL
            .iter()
            .map(|class| {
                if class.is_rest() {
                    return (0..channel_count).map(|_| rng.random_range(1.0..2.0)).collect();
                }
                let raw: Vec<f64> = (0..channel_count).map(|_| pattern.sample(&mut rng)).collect();
                let rms = (raw.iter().map(|g| g * g).sum::<f64>() / channel_count as f64).sqrt();
                let scale = base * level.sample(&mut rng) / rms;
                raw.into_iter().map(|g| g * scale).collect()
            })
            .collect();
        let noise_floor = (0..MotionClass::COUNT)
            .map(|_| rng.random_range(0.5..1.0))
            .collect();
        let d = GeneratorSettings::default();
        Self {
            channel_count,
            sample_rate,
            class_gains,
            noise_floor,
            reaction_delay: d.reaction_delay,
            ramp_duration: d.ramp_duration,
            release_hold: d.release_hold,
            release_depth: d.release_depth,
            training_ramp_fraction: d.training_ramp_fraction,
            powerline_amplitude: d.powerline_amplitude,
            gain_fluctuation: d.gain_fluctuation,
            fluctuation_ms: d.fluctuation_ms,
            seed,
        }
    }

    /// Replaces every subject-independent parameter.
    pub fn with_settings(mut self, s: &GeneratorSettings) -> Self {
        self.reaction_delay = s.reaction_delay;
        self.ramp_duration = s.ramp_duration;
        self.release_hold = s.release_hold;
        self.release_depth = s.release_depth;
        self.training_ramp_fraction = s.training_ramp_fraction;
        self.gain_fluctuation = s.gain_fluctuation;
        self.fluctuation_ms = s.fluctuation_ms;
        self.powerline_amplitude = s.powerline_amplitude;
        self
    }

    /// Same subject, different randomness for timing, ordering and noise.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_count == 0 {
            return Err(Error::param("profile needs at least one channel"));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::param("profile sample rate must be positive"));
        }
        if self.class_gains.len() != MotionClass::COUNT
            || self.noise_floor.len() != MotionClass::COUNT
        {
            return Err(Error::param("profile needs gains and floors for all 7 classes"));
        }
        for (ordinal, gains) in self.class_gains.iter().enumerate() {
            if gains.len() != self.channel_count {
                return Err(Error::param(format!(
                    "class {} has {} gains for {} channels",
                    MotionClass::ALL[ordinal],
                    gains.len(),
                    self.channel_count
                )));
            }
            if gains.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
                return Err(Error::param("gains must be non-negative and finite"));
            }
        }
        if self.noise_floor.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
            return Err(Error::param("noise floors must be non-negative"));
        }
        let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rest = norm(&self.class_gains[MotionClass::NM.ordinal()]);
        for class in MotionClass::ALL.iter().filter(|c| c.is_active()) {
            if !(norm(&self.class_gains[class.ordinal()]) > rest) {
                return Err(Error::param(format!(
                    "NM gain norm must be below that of {class}"
                )));
            }
        }
        self.reaction_delay.validate("reaction delay")?;
        self.ramp_duration.validate("ramp duration")?;
        self.release_hold.validate("release hold")?;
        if !(self.release_depth > 0.0 && self.release_depth <= 1.0) {
            return Err(Error::param("release depth must lie in (0, 1]"));
        }
        if !(self.training_ramp_fraction > 0.0 && self.training_ramp_fraction <= 1.0) {
            return Err(Error::param("training ramp fraction must lie in (0, 1]"));
        }
        if !(self.powerline_amplitude >= 0.0) {
            return Err(Error::param("powerline amplitude must be non-negative"));
        }
        if !(self.gain_fluctuation >= 0.0) || !self.gain_fluctuation.is_finite() {
            return Err(Error::param("gain fluctuation must be non-negative"));
        }
        if !(self.fluctuation_ms > 0.0) || !self.fluctuation_ms.is_finite() {
            return Err(Error::param("fluctuation time must be positive"));
        }
        Ok(())
    }

    fn level(&self, class: MotionClass) -> Level {
        Level {
            gains: self.class_gains[class.ordinal()].clone(),
            floor: self.noise_floor[class.ordinal()],
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Per-channel standard deviation is `gains[ch] + floor`.
#[derive(Debug, Clone)]
struct Level {
    gains: Vec<f64>,
    floor: f64,
}

impl Level {
    fn lerp(&self, other: &Level, u: f64) -> Level {
        Level {
            gains: self
                .gains
                .iter()
                .zip(&other.gains)
                .map(|(a, b)| a + (b - a) * u)
                .collect(),
            floor: self.floor + (other.floor - self.floor) * u,
        }
    }
}

/// Piecewise-linear envelope through `(sample index, level)` keyframes.
struct Envelope {
    keys: Vec<(f64, Level)>,
}

impl Envelope {
    fn new(start: Level) -> Self {
        Self {
            keys: vec![(0.0, start)],
        }
    }

    fn push(&mut self, at: f64, level: Level) {
        let last = self.keys.last().map_or(0.0, |k| k.0);
        self.keys.push((at.max(last), level));
    }

    fn last_level(&self) -> Level {
        self.keys.last().expect("non-empty").1.clone()
    }

    /// Renders noise for `len` samples, consuming one normal draw per
    /// channel per sample in sample-major order. The gain wobble is an AR(1)
    /// process per channel drawn from `wobble_rng`; the noise floor is not
    /// modulated.
    fn render(
        &self,
        len: usize,
        profile: &SyntheticSubjectProfile,
        rng: &mut ChaCha8Rng,
        wobble_rng: &mut ChaCha8Rng,
    ) -> Vec<Vec<f64>> {
        let channels = profile.channel_count;
        let sigma = profile.gain_fluctuation;
        let rho = (-1000.0 / (profile.fluctuation_ms * profile.sample_rate)).exp();
        let innovation = (1.0 - rho * rho).sqrt();
        let mut wobble: Vec<f64> = if sigma > 0.0 {
            (0..channels).map(|_| StandardNormal.sample(wobble_rng)).collect()
        } else {
            vec![0.0; channels]
        };
        let mut out = vec![Vec::with_capacity(len); channels];
        let mut seg = 0usize;
        let omega = 2.0 * std::f64::consts::PI / profile.sample_rate;
        for t in 0..len {
            let x = t as f64;
            while seg + 1 < self.keys.len() && self.keys[seg + 1].0 <= x {
                seg += 1;
            }
            let (t0, ref a) = self.keys[seg];
            let level = match self.keys.get(seg + 1) {
                Some((t1, b)) if *t1 > t0 => a.lerp(b, (x - t0) / (t1 - t0)),
                _ => a.clone(),
            };
            let hum = if profile.powerline_amplitude > 0.0 {
                let a = profile.powerline_amplitude;
                a * ((60.0 * omega * x).sin()
                    + (180.0 * omega * x).sin() / 3.0
                    + (300.0 * omega * x).sin() / 5.0)
            } else {
                0.0
            };
            if sigma > 0.0 {
                for w in wobble.iter_mut() {
                    let z: f64 = StandardNormal.sample(wobble_rng);
                    *w = rho * *w + innovation * z;
                }
            }
            for (ch, column) in out.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                let gain = level.gains[ch] * (sigma * wobble[ch] - 0.5 * sigma * sigma).exp();
                let v = z * (gain + level.floor) + hum;
                column.push(quantize(v));
            }
        }
        out
    }
}

fn quantize(v: f64) -> f64 {
    (v / SAMPLE_RESOLUTION).round() * SAMPLE_RESOLUTION
}

/// `reps` repetition sets, each holding one ramp contraction per class
/// (class order NM, WF, ... within a set).
pub fn generate_training_set(
    profile: &SyntheticSubjectProfile,
    reps: usize,
    rep_duration: f64,
) -> Result<Vec<Recording>> {
    profile.validate()?;
    if reps == 0 {
        return Err(Error::param("at least one repetition set is required"));
    }
    if !(rep_duration > 0.0) || !rep_duration.is_finite() {
        return Err(Error::param("repetition duration must be positive"));
    }
    let len = (rep_duration * profile.sample_rate).round() as usize;
    if len == 0 {
        return Err(Error::param("repetition shorter than one sample"));
    }
    let mut rng = profile.rng(STREAM_NOISE);
    let mut wobble = profile.rng(STREAM_WOBBLE);
    let rest = profile.level(MotionClass::NM);
    let ramp_samples = len as f64 * profile.training_ramp_fraction;
    let mut out = Vec::with_capacity(reps * MotionClass::COUNT);
    for set in 0..reps {
        for class in MotionClass::ALL {
            let mut env = Envelope::new(rest.clone());
            env.push(ramp_samples, profile.level(class));
            let samples = env.render(len, profile, &mut rng, &mut wobble);
            let timeline = PromptTimeline::uniform(&[class], rep_duration)?;
            out.push(Recording::new(
                samples,
                profile.sample_rate,
                timeline,
                RecordingKind::TrainingRepetition { set },
            )?);
        }
    }
    Ok(out)
}

/// Class sequence starting and ending at NM in which every ordered pair of
/// distinct classes occurs exactly once (an Eulerian circuit of the complete
/// directed graph on 7 vertices, with seed-shuffled edge order).
pub fn transition_sequence(rng: &mut impl Rng) -> Vec<MotionClass> {
    let n = MotionClass::COUNT;
    let mut out_edges: Vec<Vec<usize>> = (0..n)
        .map(|a| {
            let mut v: Vec<usize> = (0..n).filter(|&b| b != a).collect();
            v.shuffle(rng);
            v
        })
        .collect();
    // Hierholzer
    let mut stack = vec![MotionClass::NM.ordinal()];
    let mut circuit = Vec::with_capacity(n * (n - 1) + 1);
    while let Some(&v) = stack.last() {
        if let Some(next) = out_edges[v].pop() {
            stack.push(next);
        } else {
            circuit.push(v);
            stack.pop();
        }
    }
    circuit.reverse();
    circuit
        .into_iter()
        .map(|o| MotionClass::ALL[o])
        .collect()
}

/// One continuous test: an initial NM prompt followed by 42 prompts, one per
/// ordered class transition, each `prompt_duration` seconds long.
pub fn generate_continuous_test(
    profile: &SyntheticSubjectProfile,
    prompt_duration: f64,
) -> Result<Recording> {
    profile.validate()?;
    if !(prompt_duration > 0.0) || !prompt_duration.is_finite() {
        return Err(Error::param("prompt duration must be positive"));
    }
    let fs = profile.sample_rate;
    let prompt_samples = (prompt_duration * fs).round();
    if prompt_samples < 1.0 {
        return Err(Error::param("prompt shorter than one sample"));
    }
    let classes = transition_sequence(&mut profile.rng(STREAM_TIMELINE));
    let timeline = PromptTimeline::uniform(&classes, prompt_duration)?;
    let len = prompt_samples as usize * classes.len();

    let mut timing = profile.rng(STREAM_TIMING);
    let rest = profile.level(MotionClass::NM);
    let mut env = Envelope::new(rest.clone());
    for (i, pair) in classes.windows(2).enumerate() {
        let (from, to) = (pair[0], pair[1]);
        let change = (i + 1) as f64 * prompt_samples;
        let delay = timing_samples(profile.reaction_delay.sample(&mut timing), fs);
        let ramp = timing_samples(profile.ramp_duration.sample(&mut timing), fs);
        let hold = timing_samples(profile.release_hold.sample(&mut timing), fs);
        // keep each change inside its own prompt
        let budget = (prompt_samples * 0.9 - delay).max(1.0);
        let onset = change + delay.min(prompt_samples * 0.5);
        let current = env.last_level();
        env.push(onset, current.clone());
        if from.is_active() && to.is_active() {
            let release = ramp.min(budget / 3.0);
            let hold = hold.min(budget / 3.0);
            let engage = ramp.min(budget / 3.0);
            let mean_active = current.lerp(&profile.level(to), 0.5);
            let dip = rest.lerp(&mean_active, profile.release_depth);
            env.push(onset + release, dip.clone());
            env.push(onset + release + hold, dip);
            env.push(onset + release + hold + engage, profile.level(to));
        } else {
            env.push(onset + ramp.min(budget), profile.level(to));
        }
    }
    let samples = env.render(
        len,
        profile,
        &mut profile.rng(STREAM_NOISE),
        &mut profile.rng(STREAM_WOBBLE),
    );
    Recording::new(samples, fs, timeline, RecordingKind::ContinuousTest)
}

fn timing_samples(ms: f64, fs: f64) -> f64 {
    (ms * fs / 1000.0).round().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_set_shape() {
        let profile = SyntheticSubjectProfile::sample(1);
        let set = generate_training_set(&profile, 4, 3.0).unwrap();
        assert_eq!(set.len(), 28);
        for rec in &set {
            assert_eq!(rec.len(), 3000);
            assert_eq!(rec.channel_count(), 8);
        }
        for class in MotionClass::ALL {
            assert_eq!(set.iter().filter(|r| r.primary_class() == class).count(), 4);
        }
    }

    #[test]
    fn zero_reps_rejected() {
        let profile = SyntheticSubjectProfile::sample(1);
        assert!(matches!(
            generate_training_set(&profile, 0, 3.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let profile = SyntheticSubjectProfile::sample(3);
        let a = generate_training_set(&profile, 1, 0.5).unwrap();
        let b = generate_training_set(&profile, 1, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_profiles_rejected() {
        let mut p = SyntheticSubjectProfile::sample(1);
        p.class_gains[0] = vec![100.0; 8];
        assert!(p.validate().is_err());
        let mut p = SyntheticSubjectProfile::sample(1);
        p.ramp_duration.mean_ms = -1.0;
        assert!(p.validate().is_err());
        let mut p = SyntheticSubjectProfile::sample(1);
        p.class_gains[2][3] = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn continuous_test_covers_every_pair_once() {
        let profile = SyntheticSubjectProfile::sample(5);
        let rec = generate_continuous_test(&profile, 3.0).unwrap();
        assert_eq!(rec.timeline.len(), 43);
        assert_eq!(rec.timeline.entries[0].class, MotionClass::NM);
        assert_eq!(rec.len(), 129_000);

        // brute-force enumeration of ordered pairs
        let entries = &rec.timeline.entries;
        for a in MotionClass::ALL {
            for b in MotionClass::ALL {
                let n = entries
                    .windows(2)
                    .filter(|w| w[0].class == a && w[1].class == b)
                    .count();
                assert_eq!(n, usize::from(a != b), "pair {a}->{b}");
            }
        }
    }

    #[test]
    fn seeds_change_order_not_coverage() {
        let p = SyntheticSubjectProfile::sample(5);
        let a = generate_continuous_test(&p.with_seed(10), 0.2).unwrap();
        let b = generate_continuous_test(&p.with_seed(11), 0.2).unwrap();
        assert_ne!(a.timeline, b.timeline);
        assert!(a.timeline.covers_all_transitions());
        assert!(b.timeline.covers_all_transitions());
    }

    #[test]
    fn active_levels_exceed_rest() {
        let p = SyntheticSubjectProfile::sample(9);
        let set = generate_training_set(&p, 1, 1.0).unwrap();
        let rms = |r: &Recording| {
            let tail = &r.samples[0][800..];
            (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
        };
        let rest = rms(&set[0]);
        for rec in &set[1..] {
            assert!(rms(rec) > rest);
        }
    }

    /// RMS over all channels of `rec` in samples `[a, b)`.
    fn window_rms(rec: &Recording, a: usize, b: usize) -> f64 {
        let n = ((b - a) * rec.channel_count()) as f64;
        let ss: f64 = rec.samples.iter().flat_map(|c| &c[a..b]).map(|v| v * v).sum();
        (ss / n).sqrt()
    }

    #[test]
    fn release_dip_lies_between_rest_and_both_plateaus() {
        let mut p = SyntheticSubjectProfile::sample(4);
        p.gain_fluctuation = 0.0;
        let rec = generate_continuous_test(&p, 3.0).unwrap();
        let rest = window_rms(&rec, 500, 2500);
        let entries = &rec.timeline.entries;
        let mut checked = 0;
        for (i, w) in entries.windows(2).enumerate() {
            if !(w[0].class.is_active() && w[1].class.is_active()) {
                continue;
            }
            let change = (i + 1) * 3000;
            let before = window_rms(&rec, change - 1000, change);
            let after = window_rms(&rec, change + 2000, change + 3000);
            let lowest = (change..change + 2700 - 100)
                .step_by(50)
                .map(|a| window_rms(&rec, a, a + 100))
                .fold(f64::INFINITY, f64::min);
            assert!(lowest > 1.5 * rest, "dip reached rest at prompt {}", i + 1);
            assert!(lowest < 0.9 * before.min(after), "no dip at prompt {}", i + 1);
            checked += 1;
        }
        assert_eq!(checked, 30);
    }

    #[test]
    fn wobble_modulates_plateau_level() {
        let cv = |fluctuation: f64| {
            let mut p = SyntheticSubjectProfile::sample(6);
            p.gain_fluctuation = fluctuation;
            p.training_ramp_fraction = 0.1;
            let set = generate_training_set(&p, 1, 4.0).unwrap();
            let levels: Vec<f64> = (1000..4000)
                .step_by(160)
                .take_while(|a| a + 160 <= 4000)
                .map(|a| window_rms(&set[1], a, a + 160))
                .collect();
            let m = levels.iter().sum::<f64>() / levels.len() as f64;
            let var = levels.iter().map(|l| (l - m).powi(2)).sum::<f64>() / levels.len() as f64;
            var.sqrt() / m
        };
        let still = cv(0.0);
        let moving = cv(0.25);
        assert!(still < 0.05, "{still}");
        assert!(moving > 2.0 * still, "{moving} vs {still}");
    }

    #[test]
    fn settings_replace_shared_parameters() {
        let s = GeneratorSettings {
            release_depth: 0.9,
            gain_fluctuation: 0.0,
            ..Default::default()
        };
        let p = SyntheticSubjectProfile::sample(2).with_settings(&s);
        assert_eq!(p.release_depth, 0.9);
        assert_eq!(p.gain_fluctuation, 0.0);
        assert_eq!(p.class_gains, SyntheticSubjectProfile::sample(2).class_gains);

        let mut bad = p.clone();
        bad.gain_fluctuation = -0.1;
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.release_hold.spread_ms = -1.0;
        assert!(bad.validate().is_err());
        let mut fixed = p.clone();
        fixed.release_hold = MsDistribution {
            mean_ms: 0.0,
            spread_ms: 0.0,
        };
        assert!(fixed.validate().is_ok());
        let mut bad = p;
        bad.fluctuation_ms = 0.0;
        assert!(bad.validate().is_err());
    }
}
