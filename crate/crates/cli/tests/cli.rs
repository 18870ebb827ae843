use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn myoeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_myoeval"))
        .args(args)
        .env_remove("MYOEVAL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

const SMALL: &[&str] = &[
    "--training-sets",
    "2",
    "--test-trials",
    "1",
    "--repetition-duration",
    "1",
    "--prompt-duration",
    "1",
    "--channels",
    "3",
];

const SMALL_CONFIG: &str = "[experiment]\ntraining_sets = 2\ntest_trials = 1\nrepetition_duration_s = 1.0\nprompt_duration_s = 1.0\n[signal]\nchannels = 3\n";

/// A one-subject dataset with short recordings, plus a matching config file.
fn small_dataset() -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut args = vec!["generate", "--subjects", "1", "--seed", "4", "--out-dir", path(&data)];
    args.extend_from_slice(SMALL);
    let o = myoeval(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let config = dir.path().join("config.toml");
    fs::write(&config, SMALL_CONFIG).unwrap();
    (dir, data, config)
}

#[test]
fn generate_writes_every_recording_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = myoeval(&["generate", "--subjects", "2", "--seed", "7", "--out-dir", path(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let files = files_under(&a);
    // 2 subjects × (4 sets × 7 classes + 3 tests), plus the manifest
    assert_eq!(files.len(), 63);
    assert!(a.join("manifest.json").is_file());
    assert!(!a.join(".staging").exists());
    for f in &files {
        let twin = b.join(f.strip_prefix(&a).unwrap());
        assert_eq!(fs::read(f).unwrap(), fs::read(twin).unwrap(), "{}", f.display());
    }
}

#[test]
fn generate_without_output_directory_is_a_usage_error() {
    let o = myoeval(&["generate", "--subjects", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn run_writes_tables_and_result() {
    let (dir, data, config) = small_dataset();
    let out = dir.path().join("reports");
    let o = myoeval(&[
        "run",
        "--config",
        path(&config),
        "--data-dir",
        path(&data),
        "--out-dir",
        path(&out),
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let names: Vec<String> = files_under(&out)
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 5, "{names:?}");
    assert!(names.iter().any(|n| n == "result.json"));
    assert!(o.stdout.is_empty());

    // report re-renders the same tables from the saved result
    let again = dir.path().join("again");
    let r = myoeval(&[
        "report",
        "--result",
        path(&out.join("result.json")),
        "--out-dir",
        path(&again),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(String::from_utf8_lossy(&r.stdout).contains("R2A"));
    for f in files_under(&again) {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(out.join(name)).unwrap());
    }
}

#[test]
fn smoothed_metric_mode_reaches_provenance() {
    let (dir, data, config) = small_dataset();
    let out = dir.path().join("reports");
    let o = myoeval(&[
        "run",
        "--config",
        path(&config),
        "--data-dir",
        path(&data),
        "--out-dir",
        path(&out),
        "--classifiers",
        "LDA",
        "--metric-mode",
        "smoothed",
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let json = fs::read_to_string(out.join("result.json")).unwrap();
    assert!(json.contains("\"metric_mode\": \"smoothed\""));
}

#[test]
fn unimplemented_classifier_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = myoeval(&["run", "--subjects", "1", "--classifiers", "SVM", "--out-dir", path(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("not implemented"), "{}", stderr(&o));

    let model = dir.path().join("m.json");
    let t = myoeval(&["train", "--classifier", "MLP", "--out", path(&model)]);
    assert_eq!(code(&t), 1);
}

#[test]
fn missing_recording_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = myoeval(&["features", "--recording", path(&dir.path().join("nope.txt"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn inspect_and_features_row_counts() {
    let (dir, data, config) = small_dataset();
    let model = dir.path().join("lda.json");
    let t = myoeval(&[
        "train",
        "--config",
        path(&config),
        "--data-dir",
        path(&data),
        "--out",
        path(&model),
    ]);
    assert_eq!(code(&t), 0, "{}", stderr(&t));

    let test = files_under(&data)
        .into_iter()
        .find(|p| fs::read_to_string(p).map(|s| s.contains("kind=continuous-test")).unwrap_or(false))
        .expect("a continuous test");

    // 43 one-second prompts at 1 kHz; a 5-29 s slice holds 24 000 samples
    let trace = dir.path().join("trace.csv");
    let i = myoeval(&[
        "inspect",
        "--recording",
        path(&test),
        "--model",
        path(&model),
        "--config",
        path(&config),
        "--start",
        "5",
        "--end",
        "29",
        "--out",
        path(&trace),
    ]);
    assert_eq!(code(&i), 0, "{}", stderr(&i));
    let rows = fs::read_to_string(&trace).unwrap().lines().count() - 1;
    assert_eq!(rows, (24_000 - 160) / 16 + 1);

    let f = myoeval(&["features", "--recording", path(&test), "--config", path(&config)]);
    assert_eq!(code(&f), 0, "{}", stderr(&f));
    let rows = String::from_utf8_lossy(&f.stdout).lines().count() - 1;
    assert_eq!(rows, (43_000 - 160) / 16 + 1);
}

#[test]
fn singular_covariance_is_a_numerical_error() {
    let (dir, data, config) = small_dataset();
    // a silent channel makes its features constant, so the pooled
    // covariance is singular once the ridge is removed
    for file in files_under(&data) {
        let text = fs::read_to_string(&file).unwrap();
        if !text.contains("kind=training-repetition") {
            continue;
        }
        let (head, body) = text.split_once("[data]\n").unwrap();
        let body: String = body
            .lines()
            .map(|line| {
                let (_, rest) = line.split_once(',').unwrap();
                format!("0,{rest}\n")
            })
            .collect();
        fs::write(&file, format!("{head}[data]\n{body}")).unwrap();
    }
    fs::write(&config, format!("{SMALL_CONFIG}[classifiers]\nregularization = 0.0\n")).unwrap();
    let o = myoeval(&[
        "train",
        "--config",
        path(&config),
        "--data-dir",
        path(&data),
        "--out",
        path(&dir.path().join("m.json")),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}
