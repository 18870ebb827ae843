//! Classifier abstraction, the LDA / QDA / KNN implementations, and
//! leave-one-set-out cross-validation on training repetitions.

pub mod gaussian;
pub mod knn;
pub mod linalg;
pub mod model_io;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::MotionClass;
use crate::error::{Error, Result};
use crate::features::FeatureFrameSeries;
use crate::stream::DecisionStream;

pub use gaussian::{train_lda, train_qda, GaussianModel};
pub use knn::{train_knn, KnnModel, DEFAULT_K};

/// Relative ridge added to covariance diagonals.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub class: MotionClass,
    pub set_id: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub samples: Vec<LabeledSample>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<LabeledSample>) -> Self {
        Self { samples }
    }

    /// Appends every frame of `series` with one label.
    pub fn push_series(&mut self, series: &FeatureFrameSeries, class: MotionClass, set_id: usize) {
        self.samples.extend(series.frames.iter().map(|f| LabeledSample {
            features: f.values.clone(),
            class,
            set_id,
        }));
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// Distinct classes, by ordinal.
    pub fn classes(&self) -> Vec<MotionClass> {
        self.samples
            .iter()
            .map(|s| s.class)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn set_ids(&self) -> Vec<usize> {
        self.samples
            .iter()
            .map(|s| s.set_id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::param("dataset is empty"));
        }
        if self.samples.iter().any(|s| s.features.len() != dim) {
            return Err(Error::param("feature vectors differ in length"));
        }
        if self
            .samples
            .iter()
            .any(|s| s.features.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::param("dataset contains non-finite features"));
        }
        if self.classes().len() < 2 {
            return Err(Error::param("at least two classes are required"));
        }
        Ok(())
    }

    fn filter_sets(&self, keep: impl Fn(usize) -> bool) -> LabeledDataset {
        LabeledDataset {
            samples: self
                .samples
                .iter()
                .filter(|s| keep(s.set_id))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    LDA,
    QDA,
    KNN,
    SVM,
    MLP,
    RF,
}

impl ClassifierKind {
    pub const IMPLEMENTED: [ClassifierKind; 3] =
        [ClassifierKind::LDA, ClassifierKind::QDA, ClassifierKind::KNN];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LDA => "LDA",
            ClassifierKind::QDA => "QDA",
            ClassifierKind::KNN => "KNN",
            ClassifierKind::SVM => "SVM",
            ClassifierKind::MLP => "MLP",
            ClassifierKind::RF => "RF",
        }
    }

    pub fn is_implemented(self) -> bool {
        Self::IMPLEMENTED.contains(&self)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LDA" => Ok(ClassifierKind::LDA),
            "QDA" => Ok(ClassifierKind::QDA),
            "KNN" => Ok(ClassifierKind::KNN),
            "SVM" => Ok(ClassifierKind::SVM),
            "MLP" | "ANN" | "MLP-ANN" => Ok(ClassifierKind::MLP),
            "RF" => Ok(ClassifierKind::RF),
            other => Err(Error::param(format!("unknown classifier kind `{other}`"))),
        }
    }
}

/// Hyperparameters shared by the trainers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerParams {
    pub regularization: f64,
    pub k: usize,
}

impl Default for TrainerParams {
    fn default() -> Self {
        Self {
            regularization: DEFAULT_REGULARIZATION,
            k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierModel {
    Lda(GaussianModel),
    Qda(GaussianModel),
    Knn(KnnModel),
}

/// A per-frame classifier output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub class: MotionClass,
    pub confidence: f64,
    /// One score per model class (model class order); sums to 1.
    pub scores: Vec<f64>,
}

pub fn train(kind: ClassifierKind, data: &LabeledDataset, params: TrainerParams) -> Result<ClassifierModel> {
    match kind {
        ClassifierKind::LDA => train_lda(data, params.regularization).map(ClassifierModel::Lda),
        ClassifierKind::QDA => train_qda(data, params.regularization).map(ClassifierModel::Qda),
        ClassifierKind::KNN => train_knn(data, params.k).map(ClassifierModel::Knn),
        other => Err(Error::param(format!("classifier {other} is not implemented"))),
    }
}

/// Numerically stable softmax; the result sums to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the maximum; ties resolve to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::Lda(_) => ClassifierKind::LDA,
            ClassifierModel::Qda(_) => ClassifierKind::QDA,
            ClassifierModel::Knn(_) => ClassifierKind::KNN,
        }
    }

    pub fn classes(&self) -> &[MotionClass] {
        match self {
            ClassifierModel::Lda(m) | ClassifierModel::Qda(m) => &m.classes,
            ClassifierModel::Knn(m) => &m.classes,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ClassifierModel::Lda(m) | ClassifierModel::Qda(m) => m.dim(),
            ClassifierModel::Knn(m) => m.dim(),
        }
    }

    /// Gaussian log-joint per class for LDA/QDA; `None` for KNN.
    pub fn discriminants(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            ClassifierModel::Lda(m) | ClassifierModel::Qda(m) => Some(m.discriminants(x)),
            ClassifierModel::Knn(_) => None,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Decision> {
        if x.len() != self.dim() {
            return Err(Error::param(format!(
                "feature vector has {} values, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        let (scores, winner) = match self {
            ClassifierModel::Lda(m) | ClassifierModel::Qda(m) => {
                let scores = softmax(&m.discriminants(x));
                let w = argmax(&scores);
                (scores, w)
            }
            ClassifierModel::Knn(m) => m.vote(x),
        };
        Ok(Decision {
            class: self.classes()[winner],
            confidence: scores[winner],
            scores,
        })
    }

    pub fn predict_stream(&self, series: &FeatureFrameSeries) -> Result<DecisionStream> {
        if series.is_empty() {
            return Err(Error::param("cannot classify an empty feature series"));
        }
        let decisions = series
            .frames
            .iter()
            .map(|f| self.predict(&f.values))
            .collect::<Result<Vec<_>>>()?;
        let times = series
            .frames
            .iter()
            .map(|f| f.index.end_sample as f64 * 1000.0 / series.sample_rate)
            .collect();
        DecisionStream::new(decisions, self.classes().to_vec(), series.spec, series.sample_rate, times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out_set: usize,
    pub samples: usize,
    /// Fraction misclassified.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub mean_error: f64,
    pub warnings: Vec<String>,
}

/// Trains on all sets but one and tests on the held-out set, for every set.
pub fn leave_one_set_out(
    data: &LabeledDataset,
    trainer: impl Fn(&LabeledDataset) -> Result<ClassifierModel>,
) -> Result<CvReport> {
    data.validate()?;
    let sets = data.set_ids();
    if sets.len() < 2 {
        return Err(Error::param(
            "leave-one-set-out needs at least two distinct sets",
        ));
    }
    let all_classes = data.classes();
    let mut folds = Vec::with_capacity(sets.len());
    let mut warnings = Vec::new();
    for &held in &sets {
        let train_set = data.filter_sets(|s| s != held);
        let test_set = data.filter_sets(|s| s == held);
        let test_classes = test_set.classes();
        let train_classes = train_set.classes();
        for c in &all_classes {
            if !test_classes.contains(c) {
                warnings.push(format!("set {held}: held-out fold has no {c} samples"));
            }
            if !train_classes.contains(c) {
                warnings.push(format!("set {held}: training folds have no {c} samples"));
            }
        }
        let model = trainer(&train_set)?;
        let mut wrong = 0usize;
        for s in &test_set.samples {
            if model.predict(&s.features)?.class != s.class {
                wrong += 1;
            }
        }
        folds.push(FoldResult {
            held_out_set: held,
            samples: test_set.samples.len(),
            error: wrong as f64 / test_set.samples.len() as f64,
        });
    }
    let mean_error = folds.iter().map(|f| f.error).sum::<f64>() / folds.len() as f64;
    Ok(CvReport {
        folds,
        mean_error,
        warnings,
    })
}

#[cfg(test)]
mod tests;
