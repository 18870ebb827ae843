//! Versioned text serialization of trained models.
//!
//! ```text
//! myoeval-model
//! version=1
//! kind=LDA | QDA | KNN
//! classes=NM,WF,...
//! dim=32
//! regularization=1e-6        (LDA/QDA)
//! k=5                        (KNN)
//! [class NM]                 (LDA/QDA, one block per class)
//! log_prior=...
//! mean=...
//! [covariance 0]             (LDA: one block, QDA: one per class)
//! log_det=...
//! <dim rows of the precision matrix, row-major>
//! [points N]                 (KNN)
//! CLASS,v1,...,vdim
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::gaussian::GaussianModel;
use super::knn::KnnModel;
use super::linalg::Matrix;
use super::ClassifierModel;
use crate::dataset::MotionClass;
use crate::error::{Error, Result};

pub const MAGIC: &str = "myoeval-model";
pub const MODEL_VERSION: u32 = 1;

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}

pub fn to_text(model: &ClassifierModel) -> String {
    let mut out = String::new();
    let classes: Vec<&str> = model.classes().iter().map(|c| c.name()).collect();
    let _ = writeln!(out, "{MAGIC}\nversion={MODEL_VERSION}\nkind={}", model.kind());
    let _ = writeln!(out, "classes={}\ndim={}", classes.join(","), model.dim());
    match model {
        ClassifierModel::Lda(g) | ClassifierModel::Qda(g) => {
            let _ = writeln!(out, "regularization={}", g.regularization);
            for (k, class) in g.classes.iter().enumerate() {
                let _ = writeln!(out, "[class {class}]");
                let _ = writeln!(out, "log_prior={}", g.log_priors[k]);
                let _ = writeln!(out, "mean={}", join(&g.means[k]));
            }
            for (c, p) in g.precisions.iter().enumerate() {
                let _ = writeln!(out, "[covariance {c}]");
                let _ = writeln!(out, "log_det={}", g.log_dets[c]);
                for i in 0..p.n {
                    let _ = writeln!(out, "{}", join(p.row(i)));
                }
            }
        }
        ClassifierModel::Knn(m) => {
            let _ = writeln!(out, "k={}", m.k);
            let _ = writeln!(out, "[points {}]", m.points.len());
            for (p, &l) in m.points.iter().zip(&m.labels) {
                let _ = writeln!(out, "{},{}", m.classes[l], join(p));
            }
        }
    }
    out
}

pub fn save_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, field: &str) -> Result<&'a str> {
        loop {
            match self.inner.next() {
                Some((i, l)) if !l.trim().is_empty() => {
                    self.line = i + 1;
                    return Ok(l.trim());
                }
                Some(_) => continue,
                None => return Err(Error::format(self.line + 1, field, "unexpected end of file")),
            }
        }
    }

    fn value(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next(key)?;
        match l.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok(v.trim()),
            _ => Err(Error::format(self.line, key, format!("expected `{key}=...`"))),
        }
    }

    fn expect(&mut self, header: &str) -> Result<()> {
        let l = self.next(header)?;
        if l != header {
            return Err(Error::format(self.line, header, format!("expected `{header}`")));
        }
        Ok(())
    }

    fn num<T: std::str::FromStr>(&self, s: &str, field: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| Error::format(self.line, field, format!("cannot parse `{s}`")))
    }

    fn vector(&self, s: &str, dim: usize, field: &str) -> Result<Vec<f64>> {
        let v = s
            .split(',')
            .map(|x| self.num::<f64>(x, field))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != dim {
            return Err(Error::format(
                self.line,
                field,
                format!("expected {dim} values, found {}", v.len()),
            ));
        }
        Ok(v)
    }
}

pub fn from_text(text: &str) -> Result<ClassifierModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    lines.expect(MAGIC)?;
    let version: u32 = {
        let v = lines.value("version")?;
        lines.num(v, "version")?
    };
    if version != MODEL_VERSION {
        return Err(Error::format(lines.line, "version", format!("unsupported {version}")));
    }
    let kind = lines.value("kind")?;
    let classes = lines
        .value("classes")?
        .split(',')
        .map(|c| {
            c.parse::<MotionClass>()
                .map_err(|_| Error::format(lines.line, "classes", format!("unknown class `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let dim: usize = {
        let v = lines.value("dim")?;
        lines.num(v, "dim")?
    };
    match kind {
        "LDA" | "QDA" => {
            let regularization = {
                let v = lines.value("regularization")?;
                lines.num(v, "regularization")?
            };
            let mut means = Vec::new();
            let mut log_priors = Vec::new();
            for class in &classes {
                lines.expect(&format!("[class {class}]"))?;
                let lp = lines.value("log_prior")?;
                log_priors.push(lines.num(lp, "log_prior")?);
                let m = lines.value("mean")?;
                means.push(lines.vector(m, dim, "mean")?);
            }
            let blocks = if kind == "LDA" { 1 } else { classes.len() };
            let mut precisions = Vec::new();
            let mut log_dets = Vec::new();
            for c in 0..blocks {
                lines.expect(&format!("[covariance {c}]"))?;
                let ld = lines.value("log_det")?;
                log_dets.push(lines.num(ld, "log_det")?);
                let mut rows = Vec::with_capacity(dim);
                for _ in 0..dim {
                    let r = lines.next("precision")?;
                    rows.push(lines.vector(r, dim, "precision")?);
                }
                precisions.push(Matrix::from_rows(&rows));
            }
            let g = GaussianModel {
                classes,
                means,
                precisions,
                log_dets,
                log_priors,
                regularization,
            };
            Ok(if kind == "LDA" {
                ClassifierModel::Lda(g)
            } else {
                ClassifierModel::Qda(g)
            })
        }
        "KNN" => {
            let k: usize = {
                let v = lines.value("k")?;
                lines.num(v, "k")?
            };
            let header = lines.next("points")?;
            let n: usize = header
                .strip_prefix("[points ")
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| Error::format(lines.line, "points", "expected `[points N]`"))
                .and_then(|s| lines.num(s, "points"))?;
            let mut points = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let row = lines.next("points")?;
                let (class, rest) = row
                    .split_once(',')
                    .ok_or_else(|| Error::format(lines.line, "points", "expected CLASS,values"))?;
                let class: MotionClass = class
                    .parse()
                    .map_err(|_| Error::format(lines.line, "points", format!("unknown `{class}`")))?;
                let idx = classes
                    .iter()
                    .position(|c| *c == class)
                    .ok_or_else(|| Error::format(lines.line, "points", "class not in header"))?;
                labels.push(idx);
                points.push(lines.vector(rest, dim, "points")?);
            }
            if k == 0 || k > n {
                return Err(Error::format(lines.line, "k", "k must lie in 1..=points"));
            }
            Ok(ClassifierModel::Knn(KnnModel {
                classes,
                k,
                points,
                labels,
            }))
        }
        other => Err(Error::format(lines.line, "kind", format!("unknown kind `{other}`"))),
    }
}
