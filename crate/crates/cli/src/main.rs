//! `myoeval` command-line interface.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use myoeval::classify::model_io::{load_model, save_model};
use myoeval::classify::{train, ClassifierKind};
use myoeval::dataset::format::read_recording;
use myoeval::metrics::MetricMode;
use myoeval::pipeline::data::{load_dataset, synthesize_subject, write_dataset};
use myoeval::pipeline::inspect::{inspect, write_csv, InspectOptions};
use myoeval::pipeline::report::{load_result, render_all, summary_text, write_atomically, RESULT_FILE};
use myoeval::pipeline::{prepare_recording, run_experiment, training_dataset, ExperimentConfig};

const OUT_DIR_ENV: &str = "MYOEVAL_OUT_DIR";

#[derive(Parser)]
#[command(name = "myoeval", version, about = "Offline evaluation of myoelectric pattern recognition on continuous transitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic subjects (training repetitions and continuous tests)
    Generate(GenerateArgs),
    /// Run the full experiment and write JSON and CSV reports
    Run(RunArgs),
    /// Write a per-frame decision trace of one continuous test as CSV
    Inspect(InspectArgs),
    /// Re-render tables from a saved result.json
    Report(ReportArgs),
    /// Train one classifier on a subject's training data and save it
    Train(TrainArgs),
    /// Write the feature frames of one recording as CSV
    Features(FeaturesArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10)]
    subjects: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory [env: MYOEVAL_OUT_DIR]
    #[arg(long, env = OUT_DIR_ENV, hide_env = true)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    training_sets: usize,
    #[arg(long, default_value_t = 3)]
    test_trials: usize,
    /// Seconds per training repetition
    #[arg(long, default_value_t = 3.0)]
    repetition_duration: f64,
    /// Seconds per prompt in continuous tests
    #[arg(long, default_value_t = 3.0)]
    prompt_duration: f64,
    #[arg(long, default_value_t = 8)]
    channels: usize,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults apply to every missing field
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report directory; falls back to the config, then MYOEVAL_OUT_DIR
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset directory written by `generate`
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Comma-separated classifier kinds, e.g. LDA,QDA,KNN
    #[arg(long, value_delimiter = ',')]
    classifiers: Option<Vec<String>>,
    /// `raw` or `smoothed`
    #[arg(long)]
    metric_mode: Option<String>,
    /// Do not print the summary tables
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    recording: PathBuf,
    /// Model file written by `train`
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Slice start in seconds
    #[arg(long)]
    start: Option<f64>,
    /// Slice end in seconds
    #[arg(long)]
    end: Option<f64>,
    /// Only the frames of this transition (0-based)
    #[arg(long, conflicts_with_all = ["start", "end"])]
    transition: Option<usize>,
    /// Context frames around a selected transition
    #[arg(long, default_value_t = 30)]
    margin: usize,
    /// Output CSV; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A result.json written by `run`
    #[arg(long)]
    result: PathBuf,
    /// Directory for re-rendered CSV tables
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory; synthetic data from the config when absent
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    subject: usize,
    #[arg(long, default_value = "LDA")]
    classifier: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    recording: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CliResult<T> = Result<T, Failure>;

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

/// Numerical failures exit with 3, everything else coming from data with 2.
fn data(error: myoeval::Error) -> Failure {
    let code = match error.root() {
        myoeval::Error::Numerical { .. } => 3,
        _ => 2,
    };
    Failure {
        code,
        error: error.into(),
    }
}

fn io_failure(error: std::io::Error, path: &Path) -> Failure {
    Failure {
        code: 2,
        error: anyhow::Error::new(error).context(format!("writing {}", path.display())),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))
                .map_err(usage)?;
            ExperimentConfig::from_toml(&text)
                .with_context(|| format!("config {}", p.display()))
                .map_err(usage)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn cmd_generate(args: GenerateArgs) -> CliResult<()> {
    let mut config = ExperimentConfig::default();
    config.experiment.subjects = args.subjects;
    config.experiment.seed = args.seed;
    config.experiment.training_sets = args.training_sets;
    config.experiment.test_trials = args.test_trials;
    config.experiment.repetition_duration_s = args.repetition_duration;
    config.experiment.prompt_duration_s = args.prompt_duration;
    config.signal.channels = args.channels;
    config.validate().map_err(usage)?;

    let subjects = (0..args.subjects)
        .map(|i| synthesize_subject(&config, i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;
    // stage everything next to the target, then move it into place
    let out = &args.out_dir;
    fs::create_dir_all(out).map_err(|e| io_failure(e, out))?;
    let staging = out.join(".staging");
    let _ = fs::remove_dir_all(&staging);
    fs::create_dir_all(&staging).map_err(|e| io_failure(e, &staging))?;
    let manifest = match write_dataset(&subjects, args.seed, &staging) {
        Ok(m) => m,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(data(e));
        }
    };
    let mut entries: Vec<PathBuf> = manifest
        .subjects
        .iter()
        .filter_map(|s| s.training.first().and_then(|p| p.parent()).map(Path::to_path_buf))
        .collect();
    entries.push(PathBuf::from(myoeval::dataset::format::Manifest::FILE_NAME));
    for entry in &entries {
        let target = out.join(entry);
        if target.is_dir() {
            fs::remove_dir_all(&target).map_err(|e| io_failure(e, &target))?;
        }
        fs::rename(staging.join(entry), &target).map_err(|e| io_failure(e, &target))?;
    }
    let _ = fs::remove_dir_all(&staging);
    let files: usize = manifest.subjects.iter().map(|s| s.training.len() + s.tests.len()).sum();
    eprintln!(
        "wrote {} subjects ({files} recordings) and {} to {}",
        manifest.subjects.len(),
        myoeval::dataset::format::Manifest::FILE_NAME,
        out.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(n) = args.subjects {
        config.experiment.subjects = n;
    }
    if let Some(s) = args.seed {
        config.experiment.seed = s;
    }
    if let Some(d) = args.data_dir {
        config.experiment.data_dir = Some(d);
    }
    if let Some(k) = args.classifiers {
        config.classifiers.kinds = k;
    }
    if let Some(m) = args.metric_mode {
        config.postprocess.metric_mode = m.parse::<MetricMode>().map_err(usage)?;
    }
    config.validate().map_err(usage)?;
    let out_dir = args
        .out_dir
        .or_else(|| config.output.dir.clone())
        .or_else(env_out_dir)
        .ok_or_else(|| usage(anyhow!("no output directory: pass --out-dir, set output.dir, or set {OUT_DIR_ENV}")))?;

    let result = run_experiment(&config).map_err(data)?;
    let written = write_atomically(&out_dir, &render_all(&result)).map_err(data)?;
    if !args.quiet {
        print!("{}", summary_text(&result));
    }
    eprintln!("wrote {} report files to {}", written.len(), out_dir.display());
    if !result.failures.is_empty() {
        eprintln!("{} recording evaluation(s) failed and were excluded", result.failures.len());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CliResult<()> {
    let result = load_result(&args.result).map_err(data)?;
    if let Some(dir) = args.out_dir {
        let files: Vec<_> = render_all(&result)
            .into_iter()
            .filter(|(name, _)| name != RESULT_FILE)
            .collect();
        write_atomically(&dir, &files).map_err(data)?;
        eprintln!("wrote {} tables to {}", files.len(), dir.display());
    }
    print!("{}", summary_text(&result));
    Ok(())
}

fn emit(out: Option<&Path>, render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<()> {
    let mut buf = Vec::new();
    render(&mut buf).map_err(|e| io_failure(e, Path::new("<buffer>")))?;
    match out {
        Some(path) => write_atomically(
            path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")),
            &[(
                path.file_name()
                    .ok_or_else(|| usage(anyhow!("{} is not a file path", path.display())))?
                    .to_string_lossy()
                    .into_owned(),
                String::from_utf8(buf).expect("CSV is UTF-8"),
            )],
        )
        .map(|_| ())
        .map_err(data),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| io_failure(e, Path::new("<stdout>"))),
    }
}

fn cmd_inspect(args: InspectArgs) -> CliResult<()> {
    let config = load_config(args.config.as_deref())?;
    let recording = read_recording(&args.recording).map_err(data)?;
    let model = load_model(&args.model).map_err(data)?;
    let options = InspectOptions {
        start_s: args.start,
        end_s: args.end,
        transition: args.transition,
        margin_frames: args.margin,
    };
    let rows = inspect(&model, &recording, &config, &options).map_err(data)?;
    emit(args.out.as_deref(), |w| write_csv(&rows, w))?;
    eprintln!("{} frames", rows.len());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        config.experiment.seed = s;
    }
    let kind: ClassifierKind = args.classifier.parse().map_err(usage)?;
    let subject = match args.data_dir {
        Some(dir) => load_dataset(&dir)
            .map_err(data)?
            .into_iter()
            .find(|s| s.id == args.subject)
            .ok_or_else(|| usage(anyhow!("subject {} is not in the dataset", args.subject)))?,
        None => synthesize_subject(&config, args.subject).map_err(data)?,
    };
    let dataset = training_dataset(&subject.training, &config).map_err(data)?;
    let model = match train(kind, &dataset, config.trainer_params()) {
        Ok(m) => m,
        Err(e @ myoeval::Error::Parameter(_)) if !kind.is_implemented() => return Err(usage(e)),
        Err(e) => return Err(data(e)),
    };
    save_model(&model, &args.out).map_err(data)?;
    eprintln!("saved {kind} model for subject {} to {}", args.subject, args.out.display());
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> CliResult<()> {
    let config = load_config(args.config.as_deref())?;
    let recording = read_recording(&args.recording).map_err(data)?;
    let prepared = prepare_recording(&recording, &config).map_err(data)?;
    emit(args.out.as_deref(), |w| prepared.series.write_csv(w))?;
    eprintln!("{} frames × {} features", prepared.series.len(), prepared.series.dim());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Report(a) => cmd_report(a),
        Command::Train(a) => cmd_train(a),
        Command::Features(a) => cmd_features(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
