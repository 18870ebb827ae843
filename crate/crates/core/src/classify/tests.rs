use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::dataset::MotionClass::{self, *};
use crate::dsp::{FrameIndex, FrameSpec};
use crate::features::FeatureFrame;

fn ds(points: &[(MotionClass, &[f64])]) -> LabeledDataset {
    LabeledDataset::new(
        points
            .iter()
            .map(|(c, v)| LabeledSample {
                features: v.to_vec(),
                class: *c,
                set_id: 0,
            })
            .collect(),
    )
}

fn one_d(a: &[f64], b: &[f64]) -> LabeledDataset {
    let mut pts: Vec<(MotionClass, &[f64])> = Vec::new();
    let a: Vec<[f64; 1]> = a.iter().map(|&v| [v]).collect();
    let b: Vec<[f64; 1]> = b.iter().map(|&v| [v]).collect();
    pts.extend(a.iter().map(|v| (NM, &v[..])));
    pts.extend(b.iter().map(|v| (WF, &v[..])));
    ds(&pts)
}

#[test]
fn lda_symmetric_boundary_at_midpoint() {
    let data = one_d(&[-1.0, 0.0, 1.0], &[1.0, 2.0, 3.0]);
    let m = train(ClassifierKind::LDA, &data, TrainerParams::default()).unwrap();
    let d = m.predict(&[1.0]).unwrap();
    assert!((d.scores[0] - 0.5).abs() < 1e-9 && (d.scores[1] - 0.5).abs() < 1e-9);
    assert_eq!(m.predict(&[1.0 - 1e-6]).unwrap().class, NM);
    assert_eq!(m.predict(&[1.0 + 1e-6]).unwrap().class, WF);
}

#[test]
fn lda_labels_survive_feature_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut samples = Vec::new();
    for (c, class) in [NM, WF, WE].into_iter().enumerate() {
        for _ in 0..30 {
            let f: Vec<f64> = (0..3)
                .map(|j| c as f64 * (j as f64 + 1.0) + rng.sample::<f64, _>(StandardNormal))
                .collect();
            samples.push(LabeledSample { features: f, class, set_id: 0 });
        }
    }
    let data = LabeledDataset::new(samples);
    let scaled = LabeledDataset::new(
        data.samples
            .iter()
            .map(|s| LabeledSample {
                features: s.features.iter().map(|v| v * 10.0).collect(),
                ..s.clone()
            })
            .collect(),
    );
    let m1 = train_lda(&data, DEFAULT_REGULARIZATION).unwrap();
    let m10 = train_lda(&scaled, DEFAULT_REGULARIZATION).unwrap();
    let m1 = ClassifierModel::Lda(m1);
    let m10 = ClassifierModel::Lda(m10);
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..6.0)).collect();
        let xs: Vec<f64> = x.iter().map(|v| v * 10.0).collect();
        assert_eq!(m1.predict(&x).unwrap().class, m10.predict(&xs).unwrap().class);
    }
}

#[test]
fn lda_rank_deficient_is_numerical_error() {
    let data = ds(&[(NM, &[0.0, 1.0]), (WF, &[3.0, 2.0])]);
    assert!(matches!(train_lda(&data, 0.0), Err(Error::Numerical { .. })));
}

#[test]
fn qda_matches_lda_with_equal_covariances() {
    let data = one_d(&[-1.0, 0.0, 1.0], &[1.0, 2.0, 3.0]);
    let lda = train(ClassifierKind::LDA, &data, TrainerParams::default()).unwrap();
    let qda = train(ClassifierKind::QDA, &data, TrainerParams::default()).unwrap();
    for i in 0..=400 {
        let x = -4.0 + 0.02 * i as f64 + 0.001;
        assert_eq!(lda.predict(&[x]).unwrap().class, qda.predict(&[x]).unwrap().class, "x={x}");
    }
}

#[test]
fn qda_unequal_variance_boundary() {
    // means 0 and 10, variances 1 and 100
    let data = one_d(&[-1.0, 0.0, 1.0], &[0.0, 10.0, 20.0]);
    let qda = train(ClassifierKind::QDA, &data, TrainerParams { regularization: 0.0, k: 1 }).unwrap();
    // -x²/2 = -(x-10)²/200 - ln 10  ⇒  99x² + 20x - 100 - 200 ln 10 = 0
    let c = -100.0 - 200.0 * 10f64.ln();
    let root = (-20.0 + (400.0 - 4.0 * 99.0 * c).sqrt()) / 198.0;
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if qda.predict(&[mid]).unwrap().class == NM {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - root).abs() < 1e-9, "{lo} vs {root}");
    assert!(root < 5.0, "boundary should sit nearer the low-variance mean");
}

#[test]
fn qda_zero_variance_feature_is_numerical_error() {
    let data = ds(&[
        (NM, &[0.0, 1.0]),
        (NM, &[1.0, 1.0]),
        (NM, &[2.0, 1.0]),
        (WF, &[5.0, 2.0]),
        (WF, &[6.0, 4.0]),
        (WF, &[7.0, 3.0]),
    ]);
    assert!(matches!(train_qda(&data, 0.0), Err(Error::Numerical { .. })));
    assert!(train_qda(&data, 1e-6).is_ok());
}

#[test]
fn knn_votes_and_ties() {
    // k=1, query on a training point
    let data = ds(&[(NM, &[0.0]), (WF, &[5.0]), (WE, &[9.0])]);
    let m = train(ClassifierKind::KNN, &data, TrainerParams { k: 1, ..Default::default() }).unwrap();
    let d = m.predict(&[5.0]).unwrap();
    assert_eq!((d.class, d.confidence), (WF, 1.0));

    // k=5: three WE neighbours vs two WF neighbours
    let data = ds(&[
        (WE, &[1.0]),
        (WE, &[2.0]),
        (WE, &[3.0]),
        (WF, &[-1.5]),
        (WF, &[-2.5]),
        (NM, &[50.0]),
    ]);
    let m = train(ClassifierKind::KNN, &data, TrainerParams { k: 5, ..Default::default() }).unwrap();
    let d = m.predict(&[0.0]).unwrap();
    assert_eq!(d.class, WE);
    let we = m.classes().iter().position(|c| *c == WE).unwrap();
    assert_eq!(d.scores[we], 3.0 / 5.0);

    // k=4, 2–2 tie; nearest neighbour (at 0.9) is WF
    let data = ds(&[
        (NM, &[-1.0]),
        (NM, &[-2.0]),
        (WF, &[0.9]),
        (WF, &[2.1]),
        (WE, &[40.0]),
    ]);
    let m = train(ClassifierKind::KNN, &data, TrainerParams { k: 4, ..Default::default() }).unwrap();
    let d = m.predict(&[0.0]).unwrap();
    assert_eq!(d.class, WF);
    assert_eq!(d.confidence, 0.5);

    // fully symmetric tie falls back to the lowest ordinal
    let data = ds(&[(WE, &[1.0]), (WF, &[-1.0]), (NM, &[30.0])]);
    let m = train(ClassifierKind::KNN, &data, TrainerParams { k: 2, ..Default::default() }).unwrap();
    assert_eq!(m.predict(&[0.0]).unwrap().class, WF);
}

#[test]
fn knn_k_too_large() {
    let data = ds(&[(NM, &[0.0]), (WF, &[1.0])]);
    assert!(matches!(train_knn(&data, 3), Err(Error::Parameter(_))));
    assert!(train_knn(&data, 0).is_err());
}

#[test]
fn unimplemented_kinds_rejected() {
    let data = ds(&[(NM, &[0.0]), (WF, &[1.0])]);
    for kind in [ClassifierKind::SVM, ClassifierKind::MLP, ClassifierKind::RF] {
        let err = train(kind, &data, TrainerParams::default()).unwrap_err();
        assert!(err.to_string().contains("not implemented"));
    }
    assert_eq!("svm".parse::<ClassifierKind>().unwrap(), ClassifierKind::SVM);
    assert!("tree".parse::<ClassifierKind>().is_err());
}

fn separated(sets: usize, per_class: usize, gap: f64, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for set_id in 0..sets {
        for class in MotionClass::ALL {
            for _ in 0..per_class {
                let features = (0..3)
                    .map(|j| {
                        let center = if j == class.ordinal() % 3 { gap * (1 + class.ordinal() / 3) as f64 } else { 0.0 };
                        center + rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect();
                samples.push(LabeledSample { features, class, set_id });
            }
        }
    }
    LabeledDataset::new(samples)
}

#[test]
fn lda_confident_at_class_mean() {
    let data = separated(1, 40, 8.0, 1);
    let m = train(ClassifierKind::LDA, &data, TrainerParams::default()).unwrap();
    if let ClassifierModel::Lda(g) = &m {
        for (k, mean) in g.means.iter().enumerate() {
            let d = m.predict(mean).unwrap();
            assert_eq!(d.class, g.classes[k]);
            assert!(d.confidence > 0.99);
        }
    }
}

#[test]
fn scores_sum_to_one() {
    let data = separated(1, 20, 3.0, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in ClassifierKind::IMPLEMENTED {
        let m = train(kind, &data, TrainerParams::default()).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..10.0)).collect();
            let d = m.predict(&x).unwrap();
            assert!((d.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let max = d.scores.iter().copied().fold(0.0, f64::max);
            assert_eq!(d.confidence, max);
            // repeated calls agree exactly
            assert_eq!(m.predict(&x).unwrap(), d);
        }
        assert!(matches!(m.predict(&[1.0]), Err(Error::Parameter(_))));
    }
}

fn series(values: Vec<Vec<f64>>) -> FeatureFrameSeries {
    let spec = FrameSpec::new(4, 2).unwrap();
    FeatureFrameSeries {
        frames: values
            .into_iter()
            .enumerate()
            .map(|(i, v)| FeatureFrame { index: spec.frame(i), values: v })
            .collect(),
        spec,
        channel_count: 1,
        sample_rate: 1000.0,
    }
}

#[test]
fn stream_prediction_preserves_order() {
    let data = separated(1, 20, 5.0, 5);
    let m = train(ClassifierKind::QDA, &data, TrainerParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs: Vec<Vec<f64>> = (0..178)
        .map(|_| (0..3).map(|_| rng.random_range(-3.0..12.0)).collect())
        .collect();
    let s = m.predict_stream(&series(xs.clone())).unwrap();
    assert_eq!(s.len(), 178);
    for (x, d) in xs.iter().zip(&s.decisions) {
        assert_eq!(&m.predict(x).unwrap(), d);
    }
    let mut rev = xs.clone();
    rev.reverse();
    let r = m.predict_stream(&series(rev)).unwrap();
    for (a, b) in s.decisions.iter().zip(r.decisions.iter().rev()) {
        assert_eq!(a, b);
    }
    let c = m.predict_stream(&series(vec![vec![1.0, 2.0, 3.0]; 10])).unwrap();
    assert!(c.decisions.windows(2).all(|w| w[0] == w[1]));
    assert!(m.predict_stream(&series(vec![])).is_err());
    let _ = FrameIndex { ordinal: 0, start_sample: 0, end_sample: 4 };
}

#[test]
fn loso_separable_is_error_free() {
    let data = separated(4, 15, 12.0, 11);
    for kind in ClassifierKind::IMPLEMENTED {
        let r = leave_one_set_out(&data, |d| train(kind, d, TrainerParams::default())).unwrap();
        assert_eq!(r.folds.len(), 4);
        assert_eq!(r.mean_error, 0.0, "{kind}");
        assert!(r.warnings.is_empty());
    }
}

#[test]
fn loso_shuffled_labels_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let samples = (0..2)
        .flat_map(|set_id| (0..1400).map(move |i| (set_id, i)))
        .map(|(set_id, i)| LabeledSample {
            features: (0..3).map(|_| StandardNormal.sample(&mut rng)).collect(),
            class: MotionClass::ALL[i % 7],
            set_id,
        })
        .collect();
    let data = LabeledDataset::new(samples);
    let r = leave_one_set_out(&data, |d| train_lda(d, DEFAULT_REGULARIZATION).map(ClassifierModel::Lda)).unwrap();
    assert!((r.mean_error - 6.0 / 7.0).abs() < 0.05, "{}", r.mean_error);
}

#[test]
fn loso_needs_two_sets() {
    let data = separated(1, 5, 5.0, 1);
    assert!(matches!(
        leave_one_set_out(&data, |d| train(ClassifierKind::LDA, d, TrainerParams::default())),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn loso_warns_on_missing_class() {
    let mut data = separated(2, 10, 10.0, 3);
    data.samples.retain(|s| !(s.set_id == 1 && s.class == HO));
    let r = leave_one_set_out(&data, |d| train(ClassifierKind::KNN, d, TrainerParams::default())).unwrap();
    assert_eq!(r.folds.len(), 2);
    assert!(r.warnings.iter().any(|w| w.contains("HO")));
}

#[test]
fn knn_one_has_zero_training_error() {
    let data = separated(1, 20, 1.0, 8);
    let m = train(ClassifierKind::KNN, &data, TrainerParams { k: 1, ..Default::default() }).unwrap();
    for s in &data.samples {
        assert_eq!(m.predict(&s.features).unwrap().class, s.class);
    }
}

#[test]
fn model_text_round_trip() {
    let data = separated(1, 12, 4.0, 6);
    for kind in ClassifierKind::IMPLEMENTED {
        let m = train(kind, &data, TrainerParams::default()).unwrap();
        let back = model_io::from_text(&model_io::to_text(&m)).unwrap();
        assert_eq!(back, m, "{kind}");
    }
    assert!(model_io::from_text("myoeval-model\nversion=9\n").is_err());
}
