//! Rendering of an [`ExperimentResult`] as CSV tables, JSON and plain text.
//!
//! Tables keep the layout of the reference study: classifier rows, metric
//! columns, each cell written as a `_mean` and `_sd` column pair. Absent
//! cells (empty groups) are left blank.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::ExperimentResult;
use crate::error::{Error, Result};
use crate::metrics::{Summary, STEADY_METRICS, TRANSITION_METRICS};
use crate::stream::TransitionGroup;

pub const RESULT_FILE: &str = "result.json";
pub const OFFLINE_FILE: &str = "offline_ter.csv";
pub const STEADY_FILE: &str = "steady_state.csv";

pub fn transition_file(group: TransitionGroup) -> String {
    format!("transitions_{}.csv", group.name().to_ascii_lowercase())
}

/// Every file name [`write_reports`] produces.
pub fn report_files() -> Vec<String> {
    let mut v = vec![RESULT_FILE.to_string(), OFFLINE_FILE.to_string(), STEADY_FILE.to_string()];
    v.extend(TransitionGroup::ALL.iter().map(|&g| transition_file(g)));
    v
}

fn cells(s: &Option<Summary>) -> String {
    match s {
        Some(s) => format!("{},{}", s.mean, s.sd),
        None => ",".to_string(),
    }
}

fn header(first: &str, metrics: &[&str], last: &str) -> String {
    let mut h = first.to_string();
    for m in metrics {
        let _ = write!(h, ",{m}_mean,{m}_sd");
    }
    let _ = writeln!(h, ",{last}");
    h
}

pub fn offline_csv(result: &ExperimentResult) -> String {
    let mut out = header("classifier", &["ter"], "subjects");
    for row in &result.offline {
        let _ = writeln!(out, "{},{},{}", row.classifier, cells(&row.ter), row.per_subject.len());
    }
    out
}

pub fn steady_csv(result: &ExperimentResult) -> String {
    let mut out = header("classifier", &STEADY_METRICS, "spans");
    for row in &result.aggregate.steady {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.classifier,
            cells(&row.ter),
            cells(&row.aer),
            cells(&row.ins),
            row.span_count
        );
    }
    out
}

pub fn transition_csv(result: &ExperimentResult, group: TransitionGroup) -> String {
    let mut out = header("classifier", &TRANSITION_METRICS, "transitions");
    for row in result.aggregate.transitions.iter().filter(|r| r.group == group) {
        let _ = write!(out, "{}", row.classifier);
        for m in &row.metrics {
            let _ = write!(out, ",{}", cells(m));
        }
        let _ = writeln!(out, ",{}", row.transition_count);
    }
    out
}

pub fn to_json(result: &ExperimentResult) -> String {
    let mut s = serde_json::to_string_pretty(result).expect("result serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<ExperimentResult> {
    serde_json::from_str(text).map_err(|e| Error::format(e.line(), "result", e.to_string()))
}

pub fn load_result(path: impl AsRef<Path>) -> Result<ExperimentResult> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

/// `(file name, contents)` for every report file.
pub fn render_all(result: &ExperimentResult) -> Vec<(String, String)> {
    let mut files = vec![
        (RESULT_FILE.to_string(), to_json(result)),
        (OFFLINE_FILE.to_string(), offline_csv(result)),
        (STEADY_FILE.to_string(), steady_csv(result)),
    ];
    for g in TransitionGroup::ALL {
        files.push((transition_file(g), transition_csv(result, g)));
    }
    files
}

/// Writes every file to a temporary name first and renames only once all
/// writes succeeded, so a failure leaves no partial report behind.
pub fn write_atomically(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = std::fs::remove_file(tmp);
        }
    };
    for (name, contents) in files {
        let target = dir.join(name);
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = std::fs::write(&tmp, contents) {
            cleanup(&staged);
            let _ = std::fs::remove_file(&tmp);
            return Err(Error::io(tmp, e));
        }
        staged.push((tmp, target));
    }
    let mut done = Vec::new();
    for (i, (tmp, target)) in staged.iter().enumerate() {
        if let Err(e) = std::fs::rename(tmp, target) {
            cleanup(&staged[i..]);
            for p in &done {
                let _ = std::fs::remove_file(p);
            }
            return Err(Error::io(target, e));
        }
        done.push(target.clone());
    }
    Ok(done)
}

pub fn write_reports(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    write_atomically(dir, &render_all(result))
}

fn cell_text(s: &Option<Summary>) -> String {
    match s {
        Some(s) => format!("{:.1} ± {:.1}", s.mean, s.sd),
        None => "n/a".to_string(),
    }
}

fn table(out: &mut String, title: &str, columns: &[&str], rows: Vec<(String, Vec<String>)>) {
    let _ = writeln!(out, "{title}");
    let mut widths: Vec<usize> = std::iter::once(10)
        .chain(columns.iter().map(|c| c.len()))
        .collect();
    for (name, vals) in &rows {
        widths[0] = widths[0].max(name.len());
        for (w, v) in widths[1..].iter_mut().zip(vals) {
            *w = (*w).max(v.chars().count());
        }
    }
    let _ = write!(out, "  {:<w$}", "classifier", w = widths[0]);
    for (c, w) in columns.iter().zip(&widths[1..]) {
        let _ = write!(out, "  {c:>w$}");
    }
    out.push('\n');
    for (name, vals) in rows {
        let _ = write!(out, "  {name:<w$}", w = widths[0]);
        for (v, w) in vals.iter().zip(&widths[1..]) {
            let pad = w.saturating_sub(v.chars().count());
            let _ = write!(out, "  {}{v}", " ".repeat(pad));
        }
        out.push('\n');
    }
    out.push('\n');
}

/// Plain-text summary: one table per metric family.
pub fn summary_text(result: &ExperimentResult) -> String {
    let mut out = String::new();
    let p = &result.provenance;
    let _ = writeln!(
        out,
        "{} subjects, {:.0} s of test data, metrics on the {} stream, config {}\n",
        p.subjects.len(),
        p.test_seconds,
        p.metric_mode,
        &p.config_sha256[..12.min(p.config_sha256.len())]
    );
    table(
        &mut out,
        "Offline training error (%)",
        &["TER"],
        result
            .offline
            .iter()
            .map(|r| (r.classifier.to_string(), vec![cell_text(&r.ter)]))
            .collect(),
    );
    table(
        &mut out,
        "Steady-state metrics (%)",
        &["TER", "AER", "INS"],
        result
            .aggregate
            .steady
            .iter()
            .map(|r| {
                (
                    r.classifier.to_string(),
                    vec![cell_text(&r.ter), cell_text(&r.aer), cell_text(&r.ins)],
                )
            })
            .collect(),
    );
    for g in TransitionGroup::ALL {
        table(
            &mut out,
            &format!("{g} transitions (delays in ms, others in %)"),
            &["T_OFFSET", "T_ONSET", "T_TRANSITION", "INS", "TCE", "PNM"],
            result
                .aggregate
                .transitions
                .iter()
                .filter(|r| r.group == g)
                .map(|r| (r.classifier.to_string(), r.metrics.iter().map(cell_text).collect()))
                .collect(),
        );
    }
    if !result.failures.is_empty() {
        let _ = writeln!(out, "{} recording evaluation(s) failed:", result.failures.len());
        for f in &result.failures {
            let _ = writeln!(out, "  subject {} {} trial {}: {}", f.subject, f.classifier, f.trial, f.message);
        }
    }
    out
}
