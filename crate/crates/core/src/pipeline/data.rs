//! Subject data: synthesized in memory, or written to and read from a
//! dataset directory indexed by `manifest.json`.

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use crate::dataset::format::{read_recording, write_recording, Manifest, SubjectEntry, FORMAT_VERSION};
use crate::dataset::generator::{generate_continuous_test, generate_training_set, SyntheticSubjectProfile};
use crate::dataset::{Recording, RecordingKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectData {
    pub id: usize,
    pub training: Vec<Recording>,
    pub tests: Vec<Recording>,
}

const SUBJECT_STREAM_BASE: u64 = 16;
const TRAINING_SLOT: u64 = 0;
const PROFILE_SLOT: u64 = 1 << 20;

/// Seed for `slot` of `subject`, derived from the experiment seed.
pub fn derived_seed(seed: u64, subject: usize, slot: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SUBJECT_STREAM_BASE + subject as u64);
    rng.set_word_pos(u128::from(slot) * 2);
    rng.next_u64()
}

pub fn subject_profile(config: &ExperimentConfig, subject: usize) -> SyntheticSubjectProfile {
    SyntheticSubjectProfile::sample_with(
        derived_seed(config.experiment.seed, subject, PROFILE_SLOT),
        config.signal.channels,
        config.signal.sample_rate,
    )
    .with_settings(&config.generator)
}

pub fn synthesize_subject(config: &ExperimentConfig, subject: usize) -> Result<SubjectData> {
    let e = &config.experiment;
    let profile = subject_profile(config, subject);
    let training = generate_training_set(
        &profile.with_seed(derived_seed(e.seed, subject, TRAINING_SLOT)),
        e.training_sets,
        e.repetition_duration_s,
    )?;
    let tests = (0..e.test_trials)
        .map(|t| {
            let p = profile.with_seed(derived_seed(e.seed, subject, 1 + t as u64));
            generate_continuous_test(&p, e.prompt_duration_s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubjectData {
        id: subject,
        training,
        tests,
    })
}

/// Writes every subject under `dir` and returns the manifest (also written).
pub fn write_dataset(subjects: &[SubjectData], seed: u64, dir: &Path) -> Result<Manifest> {
    let mut entries = Vec::with_capacity(subjects.len());
    for s in subjects {
        let rel = PathBuf::from(format!("subject_{:02}", s.id));
        std::fs::create_dir_all(dir.join(&rel)).map_err(|e| Error::io(dir.join(&rel), e))?;
        let mut training = Vec::new();
        for rec in &s.training {
            let set = match rec.kind {
                RecordingKind::TrainingRepetition { set } => set,
                RecordingKind::ContinuousTest => {
                    return Err(Error::param("training list holds a continuous test"))
                }
            };
            let path = rel.join(format!("train_set{set}_{}.rec", rec.primary_class()));
            write_recording(rec, dir.join(&path))?;
            training.push(path);
        }
        let mut tests = Vec::new();
        for (t, rec) in s.tests.iter().enumerate() {
            let path = rel.join(format!("test_{t}.rec"));
            write_recording(rec, dir.join(&path))?;
            tests.push(path);
        }
        entries.push(SubjectEntry {
            id: s.id,
            training,
            tests,
        });
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        seed,
        subjects: entries,
    };
    let path = dir.join(Manifest::FILE_NAME);
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads the dataset indexed by `dir/manifest.json`, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<SubjectData>> {
    let manifest = Manifest::load(dir.join(Manifest::FILE_NAME))?;
    manifest
        .subjects
        .iter()
        .map(|entry| {
            let read_all = |paths: &[PathBuf]| {
                paths
                    .iter()
                    .map(|p| {
                        read_recording(dir.join(p)).map_err(|e| e.in_stage(format!("load {}", p.display())))
                    })
                    .collect::<Result<Vec<_>>>()
            };
            Ok(SubjectData {
                id: entry.id,
                training: read_all(&entry.training)?,
                tests: read_all(&entry.tests)?,
            })
        })
        .collect()
}
