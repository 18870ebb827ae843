//! Gaussian discriminant classifiers (LDA with pooled covariance, QDA with
//! per-class covariance).

use super::linalg::{Cholesky, Matrix};
use super::LabeledDataset;
use crate::dataset::MotionClass;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Fitted class-conditional Gaussians. LDA stores one shared precision
/// matrix, QDA one per class.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub classes: Vec<MotionClass>,
    pub means: Vec<Vec<f64>>,
    pub precisions: Vec<Matrix>,
    pub log_dets: Vec<f64>,
    pub log_priors: Vec<f64>,
    pub regularization: f64,
}

impl GaussianModel {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn is_pooled(&self) -> bool {
        self.precisions.len() == 1
    }

    fn cov_index(&self, class_idx: usize) -> usize {
        if self.is_pooled() {
            0
        } else {
            class_idx
        }
    }

    /// `ln p(x | k) + ln π_k` for every class, in `classes` order.
    pub fn discriminants(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim() as f64;
        let mut scratch = Vec::with_capacity(x.len());
        (0..self.classes.len())
            .map(|k| {
                let c = self.cov_index(k);
                let q = self.precisions[c].quadratic_form(x, &self.means[k], &mut scratch);
                self.log_priors[k] - 0.5 * (q + self.log_dets[c] + d * LN_2PI)
            })
            .collect()
    }
}

struct ClassStats {
    classes: Vec<MotionClass>,
    means: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

fn class_stats(data: &LabeledDataset) -> Result<ClassStats> {
    data.validate()?;
    let classes = data.classes();
    let dim = data.dim();
    let mut means = vec![vec![0.0; dim]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for s in &data.samples {
        let k = classes.binary_search(&s.class).expect("class listed");
        counts[k] += 1;
        for (m, v) in means[k].iter_mut().zip(&s.features) {
            *m += v;
        }
    }
    for (m, &n) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(ClassStats {
        classes,
        means,
        counts,
    })
}

fn regularize(cov: &mut Matrix, regularization: f64) -> Result<()> {
    if !(regularization >= 0.0) || !regularization.is_finite() {
        return Err(Error::param("regularization must be non-negative"));
    }
    let ridge = regularization * cov.trace() / cov.n as f64;
    cov.add_diagonal(ridge);
    Ok(())
}

fn equal_log_priors(k: usize) -> Vec<f64> {
    vec![-(k as f64).ln(); k]
}

/// Pooled within-class covariance (denominator N − K) plus a ridge of
/// `regularization · trace / dim` on the diagonal.
pub fn train_lda(data: &LabeledDataset, regularization: f64) -> Result<GaussianModel> {
    let st = class_stats(data)?;
    let dim = data.dim();
    let n = data.samples.len();
    let k = st.classes.len();
    if n <= k {
        return Err(Error::Numerical {
            message: format!("{n} samples cannot estimate a pooled covariance for {k} classes"),
            condition: f64::INFINITY,
        });
    }
    let mut cov = Matrix::zeros(dim);
    for s in &data.samples {
        let c = st.classes.binary_search(&s.class).expect("class listed");
        cov.add_outer_centered(&s.features, &st.means[c]);
    }
    cov.scale(1.0 / (n - k) as f64);
    regularize(&mut cov, regularization)?;
    let chol = Cholesky::factor(&cov)?;
    Ok(GaussianModel {
        log_priors: equal_log_priors(k),
        classes: st.classes,
        means: st.means,
        log_dets: vec![chol.log_det()],
        precisions: vec![chol.inverse()],
        regularization,
    })
}

/// One unbiased covariance per class, each with its own relative ridge.
pub fn train_qda(data: &LabeledDataset, regularization: f64) -> Result<GaussianModel> {
    let st = class_stats(data)?;
    let dim = data.dim();
    let k = st.classes.len();
    let mut covs = vec![Matrix::zeros(dim); k];
    for s in &data.samples {
        let c = st.classes.binary_search(&s.class).expect("class listed");
        covs[c].add_outer_centered(&s.features, &st.means[c]);
    }
    let mut precisions = Vec::with_capacity(k);
    let mut log_dets = Vec::with_capacity(k);
    for (c, mut cov) in covs.into_iter().enumerate() {
        let n = st.counts[c];
        if n < 2 {
            return Err(Error::Numerical {
                message: format!("class {} has {n} sample(s); covariance undefined", st.classes[c]),
                condition: f64::INFINITY,
            });
        }
        cov.scale(1.0 / (n - 1) as f64);
        regularize(&mut cov, regularization)?;
        let chol = Cholesky::factor(&cov).map_err(|e| match e {
            Error::Numerical { message, condition } => Error::Numerical {
                message: format!("class {}: {message}", st.classes[c]),
                condition,
            },
            other => other,
        })?;
        log_dets.push(chol.log_det());
        precisions.push(chol.inverse());
    }
    Ok(GaussianModel {
        log_priors: equal_log_priors(k),
        classes: st.classes,
        means: st.means,
        precisions,
        log_dets,
        regularization,
    })
}
