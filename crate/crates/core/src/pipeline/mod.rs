//! End-to-end experiment: data, offline cross-validation, continuous-test
//! evaluation, aggregation and statistics.
//!
//! Subjects are evaluated in parallel and merged in subject order, so the
//! result does not depend on scheduling.

pub mod config;
pub mod data;
pub mod inspect;
pub mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{leave_one_set_out, train, ClassifierKind, ClassifierModel, LabeledDataset};
use crate::dataset::{PromptTimeline, Recording, RecordingKind};
use crate::dsp::{apply_notch_bank_with, FrameSpec};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureFrameSeries, FEATURES_PER_CHANNEL};
use crate::metrics::{
    group_and_aggregate, steady_metrics, transition_metrics, AggregateReport, KeyedSteady, KeyedTransition,
    MetricMode, RecordKey, SteadyStateMetrics, Summary, TransitionMetrics, STEADY_METRICS, TRANSITION_METRICS,
};
use crate::stats::{dunn_sidak, kruskal_wallis, pearson, CorrelationResult, KWResult, PosthocResult};
use crate::stream::{
    compute_delays, find_steady_states, majority_vote, DecisionStream, SegmentLabeling, TransitionGroup,
};

pub use config::ExperimentConfig;
use config::hex;
use data::{load_dataset, synthesize_subject, SubjectData};

/// A recording after filtering and feature extraction; shared by every
/// classifier evaluated on it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRecording {
    pub series: FeatureFrameSeries,
    pub timeline: PromptTimeline,
    pub kind: RecordingKind,
    pub duration_s: f64,
    /// Duration minus the first prompt.
    pub prompted_s: f64,
    /// SHA-256 of the feature values and timeline.
    pub digest: String,
}

pub fn prepare_recording(recording: &Recording, config: &ExperimentConfig) -> Result<PreparedRecording> {
    let s = &config.signal;
    let filtered = apply_notch_bank_with(recording, &s.notch_centers, s.notch_order, s.notch_half_width)
        .map_err(|e| e.in_stage("filter"))?;
    let spec = FrameSpec::from_ms(config.features.frame_ms, config.features.increment_ms, recording.sample_rate)?;
    let series = extract_features(&filtered, spec, config.thresholds()).map_err(|e| e.in_stage("features"))?;
    let mut hasher = Sha256::new();
    for f in &series.frames {
        for v in &f.values {
            hasher.update(v.to_le_bytes());
        }
    }
    for e in &recording.timeline.entries {
        hasher.update(e.start_s.to_le_bytes());
        hasher.update([e.class.ordinal() as u8]);
    }
    Ok(PreparedRecording {
        series,
        timeline: recording.timeline.clone(),
        kind: recording.kind,
        duration_s: recording.duration_s(),
        prompted_s: recording.duration_s() - recording.timeline.prompt_end_s(0).min(recording.duration_s()),
        digest: hex(&hasher.finalize()),
    })
}

/// Labeled training frames from a list of training repetitions.
pub fn training_dataset(recordings: &[Recording], config: &ExperimentConfig) -> Result<LabeledDataset> {
    let mut data = LabeledDataset::default();
    for rec in recordings {
        let set = match rec.kind {
            RecordingKind::TrainingRepetition { set } => set,
            RecordingKind::ContinuousTest => {
                return Err(Error::param("a continuous test was given as training data"))
            }
        };
        let prepared = prepare_recording(rec, config)?;
        data.push_series(&prepared.series, rec.primary_class(), set);
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestEvaluation {
    pub labeling: SegmentLabeling,
    pub steady: Vec<SteadyStateMetrics>,
    pub transitions: Vec<TransitionMetrics>,
    pub raw: DecisionStream,
    pub smoothed: DecisionStream,
}

/// Filter, features, predict, smooth, segment, measure.
pub fn evaluate_test_set(
    model: &ClassifierModel,
    recording: &Recording,
    config: &ExperimentConfig,
) -> Result<TestEvaluation> {
    check_channels(model, recording.channel_count())?;
    let prepared = prepare_recording(recording, config)?;
    evaluate_prepared(model, &prepared, config)
}

fn check_channels(model: &ClassifierModel, channels: usize) -> Result<()> {
    if channels * FEATURES_PER_CHANNEL != model.dim() {
        return Err(Error::param(format!(
            "model expects {} features but the recording has {channels} channels",
            model.dim()
        )));
    }
    Ok(())
}

pub fn evaluate_prepared(
    model: &ClassifierModel,
    prepared: &PreparedRecording,
    config: &ExperimentConfig,
) -> Result<TestEvaluation> {
    check_channels(model, prepared.series.channel_count)?;
    if prepared.series.is_empty() {
        return Err(Error::Evaluation("recording is shorter than one frame".into()));
    }
    let raw = model.predict_stream(&prepared.series).map_err(|e| e.in_stage("predict"))?;
    let smoothed = majority_vote(&raw, config.postprocess.mv_window).map_err(|e| e.in_stage("smooth"))?;
    let labeling = find_steady_states(&smoothed, &prepared.timeline, config.postprocess.mv_delay_frames)
        .map_err(|e| e.in_stage("segment"))?;
    if labeling.steady.is_empty() {
        return Err(Error::Evaluation("every prompt was discarded".into()));
    }
    let measured = match config.postprocess.metric_mode {
        MetricMode::Raw => &raw,
        MetricMode::Smoothed => &smoothed,
    };
    let steady = labeling
        .steady
        .iter()
        .map(|s| steady_metrics(measured, s))
        .collect::<Result<Vec<_>>>()?;
    let delays = compute_delays(&labeling, &prepared.timeline);
    let transitions = labeling
        .transitions
        .iter()
        .zip(&delays)
        .map(|(t, d)| transition_metrics(measured, t, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(TestEvaluation {
        labeling,
        steady,
        transitions,
        raw,
        smoothed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineRow {
    pub classifier: ClassifierKind,
    /// Leave-one-set-out error in percent, summarized across subjects.
    pub ter: Option<Summary>,
    pub per_subject: Vec<SubjectValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectValue {
    pub subject: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSummary {
    pub subject: usize,
    pub classifier: ClassifierKind,
    pub trial: usize,
    pub prompts: usize,
    pub steady_spans: usize,
    pub discarded_prompts: usize,
    pub transitions: usize,
    pub dropped_transitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub subject: usize,
    pub classifier: ClassifierKind,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub subject: usize,
    pub trial: usize,
    pub classifier: ClassifierKind,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub subjects: Vec<usize>,
    pub metric_mode: MetricMode,
    /// Length of all continuous tests.
    pub test_seconds: f64,
    /// Length of the prompts following each test's initial rest prompt.
    pub prompted_test_seconds: f64,
    pub inputs: Vec<InputDigest>,
}

/// A Kruskal-Wallis comparison with its post-hoc follow-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTest {
    pub metric: String,
    /// What is being compared, e.g. `classifiers` or `groups`.
    pub factor: String,
    /// Restriction of the data, e.g. a transition group.
    pub subset: Option<String>,
    pub labels: Vec<String>,
    pub kruskal_wallis: Option<KWResult>,
    /// Present only when the omnibus test is significant.
    pub posthoc: Option<PosthocResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub metric: String,
    pub subset: Option<String>,
    pub result: Option<CorrelationResult>,
    pub significant: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsBlock {
    pub alpha: f64,
    pub offline_ter: ComparisonTest,
    pub steady: Vec<ComparisonTest>,
    pub transitions: Vec<ComparisonTest>,
    pub groups: Vec<ComparisonTest>,
    pub correlations: Vec<CorrelationRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordSet {
    pub steady: Vec<KeyedSteady>,
    pub transitions: Vec<KeyedTransition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub provenance: Provenance,
    pub classifiers: Vec<ClassifierKind>,
    pub offline: Vec<OfflineRow>,
    pub aggregate: AggregateReport,
    pub statistics: StatisticsBlock,
    pub recordings: Vec<RecordingSummary>,
    pub failures: Vec<FailureRecord>,
    pub warnings: Vec<String>,
    pub records: RecordSet,
}

struct ClassifierOutcome {
    offline_ter: f64,
    warnings: Vec<String>,
    records: RecordSet,
    recordings: Vec<RecordingSummary>,
    failures: Vec<FailureRecord>,
    inputs: Vec<InputDigest>,
}

struct SubjectOutcome {
    subject: usize,
    test_seconds: f64,
    prompted_test_seconds: f64,
    classifiers: Vec<ClassifierOutcome>,
}

fn evaluate_subject(subject: &SubjectData, kinds: &[ClassifierKind], config: &ExperimentConfig) -> Result<SubjectOutcome> {
    let id = subject.id;
    let tag = |stage: &str| format!("subject {id}: {stage}");
    let training = training_dataset(&subject.training, config).map_err(|e| e.in_stage(tag("training data")))?;
    let tests = subject
        .tests
        .iter()
        .map(|r| prepare_recording(r, config))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage(tag("test data")))?;
    let params = config.trainer_params();
    let mut classifiers = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let cv = leave_one_set_out(&training, |d| train(kind, d, params))
            .map_err(|e| e.in_stage(tag(&format!("{kind} cross-validation"))))?;
        let model = train(kind, &training, params).map_err(|e| e.in_stage(tag(&format!("{kind} training"))))?;
        let mut out = ClassifierOutcome {
            offline_ter: cv.mean_error * 100.0,
            warnings: cv.warnings.iter().map(|w| format!("subject {id} {kind}: {w}")).collect(),
            records: RecordSet::default(),
            recordings: Vec::new(),
            failures: Vec::new(),
            inputs: Vec::new(),
        };
        for (trial, prepared) in tests.iter().enumerate() {
            out.inputs.push(InputDigest {
                subject: id,
                trial,
                classifier: kind,
                sha256: prepared.digest.clone(),
            });
            let key = RecordKey {
                classifier: kind,
                subject: id,
                trial,
            };
            match evaluate_prepared(&model, prepared, config) {
                Ok(ev) => {
                    out.recordings.push(RecordingSummary {
                        subject: id,
                        classifier: kind,
                        trial,
                        prompts: ev.labeling.prompt_count,
                        steady_spans: ev.labeling.steady.len(),
                        discarded_prompts: ev.labeling.discarded_prompts.len(),
                        transitions: ev.labeling.transitions.len(),
                        dropped_transitions: ev.labeling.dropped_transition_count(),
                    });
                    out.records
                        .steady
                        .extend(ev.steady.into_iter().map(|metrics| KeyedSteady { key, metrics }));
                    out.records
                        .transitions
                        .extend(ev.transitions.into_iter().map(|metrics| KeyedTransition { key, metrics }));
                }
                Err(e @ (Error::Evaluation(_) | Error::Stage { .. })) => out.failures.push(FailureRecord {
                    subject: id,
                    classifier: kind,
                    trial,
                    message: e.to_string(),
                }),
                Err(e) => return Err(e.in_stage(tag(&format!("{kind} trial {trial}")))),
            }
        }
        classifiers.push(out);
    }
    Ok(SubjectOutcome {
        subject: id,
        test_seconds: tests.iter().map(|t| t.duration_s).sum(),
        prompted_test_seconds: tests.iter().map(|t| t.prompted_s).sum(),
        classifiers,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let kinds = config.classifier_kinds()?;
    let outcomes: Vec<SubjectOutcome> = match &config.experiment.data_dir {
        Some(dir) => {
            let subjects = load_dataset(dir).map_err(|e| e.in_stage("load dataset"))?;
            if subjects.is_empty() {
                return Err(Error::param("the dataset manifest lists no subjects"));
            }
            subjects
                .par_iter()
                .map(|s| evaluate_subject(s, &kinds, config))
                .collect::<Result<_>>()?
        }
        None => (0..config.experiment.subjects)
            .into_par_iter()
            .map(|i| {
                let s = synthesize_subject(config, i).map_err(|e| e.in_stage(format!("subject {i}: generate")))?;
                evaluate_subject(&s, &kinds, config)
            })
            .collect::<Result<_>>()?,
    };
    assemble(config, kinds, outcomes)
}

fn assemble(config: &ExperimentConfig, kinds: Vec<ClassifierKind>, outcomes: Vec<SubjectOutcome>) -> Result<ExperimentResult> {
    let mut records = RecordSet::default();
    let mut recordings = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    let mut inputs = Vec::new();
    let mut offline: Vec<OfflineRow> = kinds
        .iter()
        .map(|&classifier| OfflineRow {
            classifier,
            ter: None,
            per_subject: Vec::new(),
        })
        .collect();
    for o in &outcomes {
        for (c, row) in o.classifiers.iter().zip(offline.iter_mut()) {
            row.per_subject.push(SubjectValue {
                subject: o.subject,
                value: c.offline_ter,
            });
            records.steady.extend_from_slice(&c.records.steady);
            records.transitions.extend_from_slice(&c.records.transitions);
            recordings.extend_from_slice(&c.recordings);
            failures.extend_from_slice(&c.failures);
            warnings.extend_from_slice(&c.warnings);
            inputs.extend_from_slice(&c.inputs);
        }
    }
    for row in offline.iter_mut() {
        let values: Vec<f64> = row.per_subject.iter().map(|v| v.value).collect();
        row.ter = Summary::of(&values);
    }
    let aggregate = group_and_aggregate(&kinds, &records.transitions, &records.steady)
        .map_err(|_| Error::Evaluation("no recording could be evaluated".into()))?;
    let statistics = statistics(config.statistics.alpha, &kinds, &offline, &aggregate);
    Ok(ExperimentResult {
        provenance: Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config.digest(),
            config: config.canonical(),
            seed: config.experiment.seed,
            subjects: outcomes.iter().map(|o| o.subject).collect(),
            metric_mode: config.postprocess.metric_mode,
            test_seconds: outcomes.iter().map(|o| o.test_seconds).sum(),
            prompted_test_seconds: outcomes.iter().map(|o| o.prompted_test_seconds).sum(),
            inputs,
        },
        classifiers: kinds,
        offline,
        aggregate,
        statistics,
        recordings,
        failures,
        warnings,
        records,
    })
}

fn compare(metric: &str, factor: &str, subset: Option<String>, labels: Vec<String>, groups: Vec<Vec<f64>>, alpha: f64) -> ComparisonTest {
    let mut test = ComparisonTest {
        metric: metric.to_string(),
        factor: factor.to_string(),
        subset,
        labels,
        kruskal_wallis: None,
        posthoc: None,
        note: None,
    };
    match kruskal_wallis(&groups) {
        Ok(kw) => {
            if kw.p_value < alpha {
                test.posthoc = dunn_sidak(&groups, alpha).ok();
            }
            test.kruskal_wallis = Some(kw);
        }
        Err(e) => test.note = Some(e.to_string()),
    }
    test
}

/// Omnibus tests across classifiers (per metric) and across transition
/// groups (pooled), and correlations of offline TER with every metric.
pub fn statistics(
    alpha: f64,
    kinds: &[ClassifierKind],
    offline: &[OfflineRow],
    aggregate: &AggregateReport,
) -> StatisticsBlock {
    let labels: Vec<String> = kinds.iter().map(|k| k.name().to_string()).collect();
    let offline_ter = compare(
        "offline_ter",
        "classifiers",
        None,
        labels.clone(),
        offline
            .iter()
            .map(|r| r.per_subject.iter().map(|v| v.value).collect())
            .collect(),
        alpha,
    );
    let steady = STEADY_METRICS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let groups = kinds
                .iter()
                .map(|&k| {
                    aggregate
                        .participant_steady
                        .iter()
                        .filter(|p| p.classifier == k)
                        .map(|p| p.values[j])
                        .collect()
                })
                .collect();
            compare(name, "classifiers", None, labels.clone(), groups, alpha)
        })
        .collect();
    let mut transitions = Vec::new();
    for group in TransitionGroup::ALL {
        for (j, name) in TRANSITION_METRICS.iter().enumerate() {
            let groups = kinds
                .iter()
                .map(|&k| {
                    aggregate
                        .participant_transitions
                        .iter()
                        .filter(|p| p.classifier == k && p.group == group)
                        .map(|p| p.values[j])
                        .collect()
                })
                .collect();
            transitions.push(compare(name, "classifiers", Some(group.to_string()), labels.clone(), groups, alpha));
        }
    }
    let group_labels: Vec<String> = TransitionGroup::ALL.iter().map(|g| g.to_string()).collect();
    let groups = TRANSITION_METRICS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let samples = TransitionGroup::ALL
                .iter()
                .map(|&g| {
                    aggregate
                        .participant_transitions
                        .iter()
                        .filter(|p| p.group == g)
                        .map(|p| p.values[j])
                        .collect()
                })
                .collect();
            compare(name, "groups", None, group_labels.clone(), samples, alpha)
        })
        .collect();

    let offline_of = |k: ClassifierKind, subject: usize| {
        offline
            .iter()
            .find(|r| r.classifier == k)
            .and_then(|r| r.per_subject.iter().find(|v| v.subject == subject))
            .map(|v| v.value)
    };
    let correlate = |metric: &str, subset: Option<String>, pairs: Vec<(f64, f64)>| {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        match pearson(&x, &y) {
            Ok(r) => CorrelationRow {
                metric: metric.to_string(),
                subset,
                significant: Some(r.p_value < alpha),
                result: Some(r),
                note: None,
            },
            Err(e) => CorrelationRow {
                metric: metric.to_string(),
                subset,
                result: None,
                significant: None,
                note: Some(e.to_string()),
            },
        }
    };
    let mut correlations = Vec::new();
    for (j, name) in STEADY_METRICS.iter().enumerate() {
        let pairs = aggregate
            .participant_steady
            .iter()
            .filter_map(|p| offline_of(p.classifier, p.subject).map(|o| (o, p.values[j])))
            .collect();
        correlations.push(correlate(name, None, pairs));
    }
    for group in TransitionGroup::ALL {
        for (j, name) in TRANSITION_METRICS.iter().enumerate() {
            let pairs = aggregate
                .participant_transitions
                .iter()
                .filter(|p| p.group == group)
                .filter_map(|p| offline_of(p.classifier, p.subject).map(|o| (o, p.values[j])))
                .collect();
            correlations.push(correlate(name, Some(group.to_string()), pairs));
        }
    }
    StatisticsBlock {
        alpha,
        offline_ter,
        steady,
        transitions,
        groups,
        correlations,
    }
}
