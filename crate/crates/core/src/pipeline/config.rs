//! Experiment configuration, read from TOML.
//!
//! Every field is optional. Defaults reproduce the reference protocol:
//! 8 channels at 1 kHz, 160/16 ms frames, 9-decision majority vote with a
//! 4-frame delay, k = 5, α = 0.05.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{ClassifierKind, TrainerParams, DEFAULT_K, DEFAULT_REGULARIZATION};
use crate::dataset::{DEFAULT_CHANNELS, DEFAULT_PROMPT_DURATION_S, DEFAULT_SAMPLE_RATE};
use crate::dataset::generator::GeneratorSettings;
use crate::dsp::{FrameSpec, DEFAULT_NOTCH_CENTERS, DEFAULT_NOTCH_HALF_WIDTH, DEFAULT_NOTCH_ORDER};
use crate::error::{Error, Result};
use crate::features::Thresholds;
use crate::metrics::MetricMode;
use crate::stats::DEFAULT_ALPHA;
use crate::stream::{DEFAULT_MV_DELAY_FRAMES, DEFAULT_MV_WINDOW};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentSection,
    pub signal: SignalSection,
    /// Synthetic data parameters; ignored when loading recorded data.
    pub generator: GeneratorSettings,
    pub features: FeatureSection,
    pub classifiers: ClassifierSection,
    pub postprocess: PostprocessSection,
    pub statistics: StatisticsSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub subjects: usize,
    pub seed: u64,
    pub training_sets: usize,
    pub test_trials: usize,
    pub repetition_duration_s: f64,
    pub prompt_duration_s: f64,
    /// Directory holding a `manifest.json`; synthetic subjects are generated
    /// in memory when absent.
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub channels: usize,
    pub sample_rate: f64,
    pub notch_centers: Vec<f64>,
    pub notch_order: usize,
    pub notch_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub frame_ms: f64,
    pub increment_ms: f64,
    pub zc_threshold: f64,
    pub ssc_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub kinds: Vec<String>,
    pub regularization: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessSection {
    pub mv_window: usize,
    pub mv_delay_frames: usize,
    pub metric_mode: MetricMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatisticsSection {
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            experiment: ExperimentSection::default(),
            signal: SignalSection::default(),
            generator: GeneratorSettings::default(),
            features: FeatureSection::default(),
            classifiers: ClassifierSection::default(),
            postprocess: PostprocessSection::default(),
            statistics: StatisticsSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            subjects: 10,
            seed: 1,
            training_sets: 4,
            test_trials: 3,
            repetition_duration_s: 3.0,
            prompt_duration_s: DEFAULT_PROMPT_DURATION_S,
            data_dir: None,
        }
    }
}

impl Default for SignalSection {
    fn default() -> Self {
        Self {
            channels: DEFAULT_CHANNELS,
            sample_rate: DEFAULT_SAMPLE_RATE,
            notch_centers: DEFAULT_NOTCH_CENTERS.to_vec(),
            notch_order: DEFAULT_NOTCH_ORDER,
            notch_half_width: DEFAULT_NOTCH_HALF_WIDTH,
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            frame_ms: 160.0,
            increment_ms: 16.0,
            zc_threshold: 0.0,
            ssc_threshold: 0.0,
        }
    }
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            kinds: ClassifierKind::IMPLEMENTED.iter().map(|k| k.name().to_string()).collect(),
            regularization: DEFAULT_REGULARIZATION,
            k: DEFAULT_K,
        }
    }
}

impl Default for PostprocessSection {
    fn default() -> Self {
        Self {
            mv_window: DEFAULT_MV_WINDOW,
            mv_delay_frames: DEFAULT_MV_DELAY_FRAMES,
            metric_mode: MetricMode::Raw,
        }
    }
}

impl Default for StatisticsSection {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::format(line, "config", e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn classifier_kinds(&self) -> Result<Vec<ClassifierKind>> {
        let mut kinds = Vec::new();
        for name in &self.classifiers.kinds {
            let kind: ClassifierKind = name.parse()?;
            if !kind.is_implemented() {
                return Err(Error::param(format!("classifier {kind} is not implemented")));
            }
            if kinds.contains(&kind) {
                return Err(Error::param(format!("classifier {kind} listed twice")));
            }
            kinds.push(kind);
        }
        Ok(kinds)
    }

    pub fn frame_spec(&self) -> Result<FrameSpec> {
        FrameSpec::from_ms(self.features.frame_ms, self.features.increment_ms, self.signal.sample_rate)
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            zc: self.features.zc_threshold,
            ssc: self.features.ssc_threshold,
        }
    }

    pub fn trainer_params(&self) -> TrainerParams {
        TrainerParams {
            regularization: self.classifiers.regularization,
            k: self.classifiers.k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::param(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let e = &self.experiment;
        if e.data_dir.is_none() && e.subjects == 0 {
            return Err(Error::param("experiment.subjects must be ≥ 1"));
        }
        if e.training_sets < 2 {
            return Err(Error::param("experiment.training_sets must be ≥ 2 for leave-one-set-out"));
        }
        if e.test_trials == 0 {
            return Err(Error::param("experiment.test_trials must be ≥ 1"));
        }
        for (name, v) in [
            ("experiment.repetition_duration_s", e.repetition_duration_s),
            ("experiment.prompt_duration_s", e.prompt_duration_s),
            ("signal.sample_rate", self.signal.sample_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive")));
            }
        }
        if self.signal.channels == 0 {
            return Err(Error::param("signal.channels must be ≥ 1"));
        }
        if self.signal.notch_order == 0 {
            return Err(Error::param("signal.notch_order must be ≥ 1"));
        }
        self.frame_spec()?;
        if self.thresholds().zc < 0.0 || self.thresholds().ssc < 0.0 {
            return Err(Error::param("feature thresholds must be non-negative"));
        }
        let kinds = self.classifier_kinds()?;
        if kinds.is_empty() {
            return Err(Error::param("classifiers.kinds is empty"));
        }
        if self.classifiers.k == 0 {
            return Err(Error::param("classifiers.k must be ≥ 1"));
        }
        if !(self.classifiers.regularization >= 0.0) {
            return Err(Error::param("classifiers.regularization must be ≥ 0"));
        }
        let w = self.postprocess.mv_window;
        if w == 0 || w % 2 == 0 {
            return Err(Error::param(format!("postprocess.mv_window must be odd, got {w}")));
        }
        let a = self.statistics.alpha;
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::param(format!("statistics.alpha must lie in (0, 1), got {a}")));
        }
        Ok(())
    }

    /// The configuration as it affects results: the output location is
    /// cleared.
    pub fn canonical(&self) -> ExperimentConfig {
        ExperimentConfig {
            output: OutputSection::default(),
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical configuration, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
