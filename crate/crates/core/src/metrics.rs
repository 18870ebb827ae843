//! Steady-state and transition metrics, and their aggregation into
//! report tables.
//!
//! Percentages are in [0, 100]. Delays are in ms. Metrics are measured on the
//! unsmoothed stream unless [`MetricMode::Smoothed`] is selected; spans always
//! come from the smoothed stream.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::ClassifierKind;
use crate::dataset::MotionClass;
use crate::error::{Error, Result};
use crate::stream::{
    DecisionStream, SteadyStateSpan, TransitionDelays, TransitionGroup, TransitionSpan,
};

pub const STEADY_METRICS: [&str; 3] = ["ter", "aer", "ins"];
pub const TRANSITION_METRICS: [&str; 6] =
    ["t_offset_ms", "t_onset_ms", "t_transition_ms", "ins", "tce", "pnm"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    #[default]
    Raw,
    Smoothed,
}

impl MetricMode {
    pub fn name(self) -> &'static str {
        match self {
            MetricMode::Raw => "raw",
            MetricMode::Smoothed => "smoothed",
        }
    }
}

impl fmt::Display for MetricMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" | "unsmoothed" => Ok(MetricMode::Raw),
            "smoothed" => Ok(MetricMode::Smoothed),
            other => Err(Error::param(format!("unknown metric mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateMetrics {
    pub class: MotionClass,
    pub ter: f64,
    pub aer: f64,
    pub ins: f64,
    pub decision_count: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMetrics {
    pub from_class: MotionClass,
    pub to_class: MotionClass,
    pub group: TransitionGroup,
    pub t_offset_ms: f64,
    pub t_onset_ms: f64,
    pub t_transition_ms: f64,
    pub ins: f64,
    pub tce: f64,
    pub pnm: f64,
    pub decision_count: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl TransitionMetrics {
    /// Values in [`TRANSITION_METRICS`] order.
    pub fn values(&self) -> [f64; 6] {
        [
            self.t_offset_ms,
            self.t_onset_ms,
            self.t_transition_ms,
            self.ins,
            self.tce,
            self.pnm,
        ]
    }
}

impl SteadyStateMetrics {
    /// Values in [`STEADY_METRICS`] order.
    pub fn values(&self) -> [f64; 3] {
        [self.ter, self.aer, self.ins]
    }
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 * 100.0 / total as f64
    }
}

/// Consecutive pairs that are both active and differ.
fn unstable_pairs(labels: &[MotionClass]) -> usize {
    labels
        .windows(2)
        .filter(|w| w[0].is_active() && w[1].is_active() && w[0] != w[1])
        .count()
}

fn span_labels(stream: &DecisionStream, start: usize, end: usize) -> Result<Vec<MotionClass>> {
    if start > end || end > stream.len() {
        return Err(Error::param(format!(
            "span {start}..{end} lies outside a stream of {} decisions",
            stream.len()
        )));
    }
    Ok(stream.decisions[start..end].iter().map(|d| d.class).collect())
}

pub fn steady_metrics(stream: &DecisionStream, span: &SteadyStateSpan) -> Result<SteadyStateMetrics> {
    let labels = span_labels(stream, span.start_frame, span.end_frame)?;
    if labels.is_empty() {
        return Err(Error::param("steady-state span is empty"));
    }
    let n = labels.len();
    let wrong = labels.iter().filter(|&&c| c != span.class).count();
    let active_wrong = labels
        .iter()
        .filter(|&&c| c != span.class && c.is_active())
        .count();
    Ok(SteadyStateMetrics {
        class: span.class,
        ter: percent(wrong, n),
        aer: percent(active_wrong, n),
        ins: percent(unstable_pairs(&labels), n),
        decision_count: n,
        start_frame: span.start_frame,
        end_frame: span.end_frame,
    })
}

pub fn transition_metrics(
    stream: &DecisionStream,
    span: &TransitionSpan,
    delays: &TransitionDelays,
) -> Result<TransitionMetrics> {
    let labels = span_labels(stream, span.start_frame, span.end_frame)?;
    let n = labels.len();
    let tertiary = labels
        .iter()
        .filter(|&&c| c != span.from_class && c != span.to_class && c.is_active())
        .count();
    let rest = labels.iter().filter(|c| c.is_rest()).count();
    Ok(TransitionMetrics {
        from_class: span.from_class,
        to_class: span.to_class,
        group: span.group,
        t_offset_ms: delays.t_offset_ms,
        t_onset_ms: delays.t_onset_ms,
        t_transition_ms: delays.t_transition_ms,
        ins: percent(unstable_pairs(&labels), n),
        tce: percent(tertiary, n),
        pnm: percent(rest, n),
        decision_count: n,
        start_frame: span.start_frame,
        end_frame: span.end_frame,
    })
}

/// Sample mean and standard deviation (n − 1; 0 when n = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Summary { mean, sd, n })
    }
}

/// Where a metric record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub classifier: ClassifierKind,
    pub subject: usize,
    pub trial: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyedSteady {
    pub key: RecordKey,
    pub metrics: SteadyStateMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyedTransition {
    pub key: RecordKey,
    pub metrics: TransitionMetrics,
}

/// Per-classifier steady-state row; each cell summarizes per-(subject, class)
/// trial averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyRow {
    pub classifier: ClassifierKind,
    pub ter: Option<Summary>,
    pub aer: Option<Summary>,
    pub ins: Option<Summary>,
    pub span_count: usize,
}

/// Per-(classifier, group) transition row; each cell summarizes
/// per-(subject, from, to) trial averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub classifier: ClassifierKind,
    pub group: TransitionGroup,
    /// In [`TRANSITION_METRICS`] order; `None` when the group is empty.
    pub metrics: Vec<Option<Summary>>,
    pub transition_count: usize,
}

/// Per-subject means, used for the statistical tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSteady {
    pub classifier: ClassifierKind,
    pub subject: usize,
    pub values: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTransition {
    pub classifier: ClassifierKind,
    pub subject: usize,
    pub group: TransitionGroup,
    pub values: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub steady: Vec<SteadyRow>,
    pub transitions: Vec<TransitionRow>,
    pub participant_steady: Vec<ParticipantSteady>,
    pub participant_transitions: Vec<ParticipantTransition>,
}

impl AggregateReport {
    pub fn transition_row(&self, classifier: ClassifierKind, group: TransitionGroup) -> Option<&TransitionRow> {
        self.transitions
            .iter()
            .find(|r| r.classifier == classifier && r.group == group)
    }

    pub fn steady_row(&self, classifier: ClassifierKind) -> Option<&SteadyRow> {
        self.steady.iter().find(|r| r.classifier == classifier)
    }
}

fn mean_of<const N: usize>(rows: &[[f64; N]]) -> [f64; N] {
    let mut out = [0.0; N];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    for o in out.iter_mut() {
        *o /= rows.len() as f64;
    }
    out
}

fn column<const N: usize>(rows: &[[f64; N]], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

/// Averages across trials per (subject, class) or (subject, transition),
/// then summarizes per classifier (and group). `classifiers` fixes the row
/// order and makes empty groups appear as absent cells.
pub fn group_and_aggregate(
    classifiers: &[ClassifierKind],
    transitions: &[KeyedTransition],
    steady: &[KeyedSteady],
) -> Result<AggregateReport> {
    if transitions.is_empty() && steady.is_empty() {
        return Err(Error::param("nothing to aggregate"));
    }

    let mut steady_cells: BTreeMap<(ClassifierKind, usize, MotionClass), Vec<[f64; 3]>> = BTreeMap::new();
    for s in steady {
        steady_cells
            .entry((s.key.classifier, s.key.subject, s.metrics.class))
            .or_default()
            .push(s.metrics.values());
    }
    let mut trans_cells: BTreeMap<(ClassifierKind, usize, MotionClass, MotionClass), Vec<[f64; 6]>> =
        BTreeMap::new();
    for t in transitions {
        trans_cells
            .entry((t.key.classifier, t.key.subject, t.metrics.from_class, t.metrics.to_class))
            .or_default()
            .push(t.metrics.values());
    }

    let mut steady_rows = Vec::new();
    let mut participant_steady = Vec::new();
    let mut transition_rows = Vec::new();
    let mut participant_transitions = Vec::new();
    for &classifier in classifiers {
        let averaged: Vec<(usize, [f64; 3])> = steady_cells
            .iter()
            .filter(|(k, _)| k.0 == classifier)
            .map(|(k, v)| (k.1, mean_of(v)))
            .collect();
        let vals: Vec<[f64; 3]> = averaged.iter().map(|a| a.1).collect();
        steady_rows.push(SteadyRow {
            classifier,
            ter: Summary::of(&column(&vals, 0)),
            aer: Summary::of(&column(&vals, 1)),
            ins: Summary::of(&column(&vals, 2)),
            span_count: steady.iter().filter(|s| s.key.classifier == classifier).count(),
        });
        let mut by_subject: BTreeMap<usize, Vec<[f64; 3]>> = BTreeMap::new();
        for (subject, v) in averaged {
            by_subject.entry(subject).or_default().push(v);
        }
        for (subject, v) in by_subject {
            participant_steady.push(ParticipantSteady {
                classifier,
                subject,
                values: mean_of(&v),
            });
        }

        for group in TransitionGroup::ALL {
            let averaged: Vec<(usize, [f64; 6])> = trans_cells
                .iter()
                .filter(|(k, _)| k.0 == classifier && TransitionGroup::of(k.2, k.3) == group)
                .map(|(k, v)| (k.1, mean_of(v)))
                .collect();
            let vals: Vec<[f64; 6]> = averaged.iter().map(|a| a.1).collect();
            transition_rows.push(TransitionRow {
                classifier,
                group,
                metrics: (0..6).map(|j| Summary::of(&column(&vals, j))).collect(),
                transition_count: transitions
                    .iter()
                    .filter(|t| t.key.classifier == classifier && t.metrics.group == group)
                    .count(),
            });
            let mut by_subject: BTreeMap<usize, Vec<[f64; 6]>> = BTreeMap::new();
            for (subject, v) in averaged {
                by_subject.entry(subject).or_default().push(v);
            }
            for (subject, v) in by_subject {
                participant_transitions.push(ParticipantTransition {
                    classifier,
                    subject,
                    group,
                    values: mean_of(&v),
                });
            }
        }
    }
    Ok(AggregateReport {
        steady: steady_rows,
        transitions: transition_rows,
        participant_steady,
        participant_transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MotionClass::*;
    use crate::dsp::FrameSpec;
    use crate::stream::FrameClock;
    use proptest::prelude::*;

    fn stream(labels: &[MotionClass]) -> DecisionStream {
        let decisions = labels
            .iter()
            .map(|&class| crate::classify::Decision {
                class,
                confidence: 1.0,
                scores: vec![],
            })
            .collect();
        DecisionStream::from_decisions(
            decisions,
            MotionClass::ALL.to_vec(),
            FrameClock {
                spec: FrameSpec::DEFAULT,
                sample_rate: 1000.0,
            },
        )
    }

    fn steady(class: MotionClass, n: usize) -> SteadyStateSpan {
        SteadyStateSpan {
            class,
            start_frame: 0,
            end_frame: n,
            prompt_index: 0,
        }
    }

    fn trans(from: MotionClass, to: MotionClass, n: usize) -> TransitionSpan {
        TransitionSpan {
            from_class: from,
            to_class: to,
            start_frame: 0,
            end_frame: n,
            group: TransitionGroup::of(from, to),
            from_prompt: 0,
            to_prompt: 1,
            change_prompt: 1,
        }
    }

    const NO_DELAY: TransitionDelays = TransitionDelays {
        t_offset_ms: 10.0,
        t_onset_ms: 30.0,
        t_transition_ms: 20.0,
    };

    #[test]
    fn steady_examples() {
        let mut l = vec![WF; 8];
        l.extend([NM, WE]);
        let m = steady_metrics(&stream(&l), &steady(WF, 10)).unwrap();
        assert!((m.ter - 20.0).abs() < 1e-12);
        assert!((m.aer - 10.0).abs() < 1e-12);

        let l = [WF, WF, WE, WE, WF];
        let m = steady_metrics(&stream(&l), &steady(WF, 5)).unwrap();
        assert!((m.ins - 40.0).abs() < 1e-12);

        let m = steady_metrics(&stream(&[HO; 6]), &steady(HO, 6)).unwrap();
        assert_eq!((m.ter, m.aer, m.ins), (0.0, 0.0, 0.0));
    }

    #[test]
    fn steady_empty_or_outside_is_error() {
        assert!(steady_metrics(&stream(&[WF; 3]), &steady(WF, 0)).is_err());
        assert!(steady_metrics(&stream(&[WF; 3]), &steady(WF, 4)).is_err());
    }

    #[test]
    fn transition_examples() {
        let m = transition_metrics(&stream(&[WF, NM, CG, WE, WE]), &trans(WF, WE, 5), &NO_DELAY).unwrap();
        assert!((m.tce - 20.0).abs() < 1e-12);
        assert!((m.pnm - 20.0).abs() < 1e-12);

        let m = transition_metrics(&stream(&[NM; 7]), &trans(WF, WE, 7), &NO_DELAY).unwrap();
        assert_eq!((m.tce, m.pnm, m.ins), (0.0, 100.0, 0.0));

        let m = transition_metrics(&stream(&[WF, CG, HO, WE]), &trans(WF, WE, 4), &NO_DELAY).unwrap();
        assert!((m.ins - 75.0).abs() < 1e-12);
        assert!((m.tce - 50.0).abs() < 1e-12);
    }

    #[test]
    fn empty_transition_passes_delays() {
        let m = transition_metrics(&stream(&[WF]), &trans(WF, WE, 0), &NO_DELAY).unwrap();
        assert_eq!((m.ins, m.tce, m.pnm, m.decision_count), (0.0, 0.0, 0.0, 0));
        assert_eq!(m.t_transition_ms, 20.0);
    }

    #[test]
    fn summary_examples() {
        assert_eq!(Summary::of(&[]), None);
        assert_eq!(Summary::of(&[5.0]).unwrap().sd, 0.0);
        let s = Summary::of(&[50.0, 150.0]).unwrap();
        assert_eq!(s.mean, 100.0);
        assert!((s.sd - 70.71067811865476).abs() < 1e-9);
    }

    fn keyed(classifier: ClassifierKind, subject: usize, trial: usize, from: MotionClass, to: MotionClass, t: f64) -> KeyedTransition {
        KeyedTransition {
            key: RecordKey { classifier, subject, trial },
            metrics: TransitionMetrics {
                from_class: from,
                to_class: to,
                group: TransitionGroup::of(from, to),
                t_offset_ms: 0.0,
                t_onset_ms: t,
                t_transition_ms: t,
                ins: 0.0,
                tce: 0.0,
                pnm: 0.0,
                decision_count: 1,
                start_frame: 0,
                end_frame: 1,
            },
        }
    }

    #[test]
    fn aggregation_averages_trials_then_summarizes() {
        let lda = ClassifierKind::LDA;
        let recs = vec![
            // subject 0, NM→WF, trials 100 and 200 average to 150
            keyed(lda, 0, 0, NM, WF, 100.0),
            keyed(lda, 0, 1, NM, WF, 200.0),
            keyed(lda, 1, 0, NM, WF, 50.0),
            keyed(lda, 0, 0, WF, WE, 400.0),
        ];
        let r = group_and_aggregate(&[lda, ClassifierKind::QDA], &recs, &[]).unwrap();
        let r2a = r.transition_row(lda, TransitionGroup::R2A).unwrap();
        let s = r2a.metrics[2].unwrap();
        assert_eq!((s.mean, s.n), (100.0, 2));
        assert!((s.sd - 70.71067811865476).abs() < 1e-9);
        assert_eq!(r2a.transition_count, 3);
        assert!(r.transition_row(lda, TransitionGroup::A2R).unwrap().metrics[2].is_none());
        assert!(r.transition_row(ClassifierKind::QDA, TransitionGroup::R2A).unwrap().metrics[0].is_none());
        let total: usize = r.transitions.iter().map(|t| t.transition_count).sum();
        assert_eq!(total, recs.len());
        assert_eq!(r.transitions.len(), 6);
        assert_eq!(r.participant_transitions.len(), 3);
    }

    #[test]
    fn aggregation_rejects_empty() {
        assert!(group_and_aggregate(&[ClassifierKind::LDA], &[], &[]).is_err());
    }

    fn class_strategy() -> impl Strategy<Value = MotionClass> {
        (0usize..7).prop_map(|i| MotionClass::ALL[i])
    }

    proptest! {
        #[test]
        fn steady_bounds(labels in proptest::collection::vec(class_strategy(), 1..40), c in class_strategy()) {
            let m = steady_metrics(&stream(&labels), &steady(c, labels.len())).unwrap();
            prop_assert!(0.0 <= m.aer && m.aer <= m.ter && m.ter <= 100.0);
            prop_assert!((0.0..100.0).contains(&m.ins));
        }

        #[test]
        fn transition_partition(labels in proptest::collection::vec(class_strategy(), 1..40), a in class_strategy(), b in class_strategy()) {
            prop_assume!(a != b);
            let m = transition_metrics(&stream(&labels), &trans(a, b, labels.len()), &NO_DELAY).unwrap();
            let adjacent = labels.iter().filter(|&&c| (c == a || c == b) && c.is_active()).count() as f64
                * 100.0 / labels.len() as f64;
            prop_assert!((m.tce + m.pnm + adjacent - 100.0).abs() < 1e-9);
            prop_assert!(m.tce + m.pnm <= 100.0 + 1e-9);
        }
    }
}
