//! k-nearest neighbours on raw feature values (Euclidean distance).
//!
//! Neighbours are ordered by (distance, training index). Vote ties go to the
//! tied class owning the nearest neighbour; if that is still ambiguous
//! (equal distances) the lowest class ordinal wins.

use super::LabeledDataset;
use crate::dataset::MotionClass;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub classes: Vec<MotionClass>,
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    /// Index into `classes` for each stored point.
    pub labels: Vec<usize>,
}

pub fn train_knn(data: &LabeledDataset, k: usize) -> Result<KnnModel> {
    data.validate()?;
    if k == 0 {
        return Err(Error::param("k must be ≥ 1"));
    }
    if k > data.samples.len() {
        return Err(Error::param(format!(
            "k = {k} exceeds the {} training samples",
            data.samples.len()
        )));
    }
    let classes = data.classes();
    let labels = data
        .samples
        .iter()
        .map(|s| classes.binary_search(&s.class).expect("class listed"))
        .collect();
    Ok(KnnModel {
        classes,
        k,
        points: data.samples.iter().map(|s| s.features.clone()).collect(),
        labels,
    })
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// The k nearest `(squared distance, training index)` pairs, ascending.
    pub fn neighbours(&self, x: &[f64]) -> Vec<(f64, usize)> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, p) in self.points.iter().enumerate() {
            let worst = if best.len() == self.k {
                best[self.k - 1].0
            } else {
                f64::INFINITY
            };
            let mut d = 0.0;
            for (a, b) in p.iter().zip(x) {
                let t = a - b;
                d += t * t;
                if d > worst {
                    break;
                }
            }
            if best.len() == self.k && d >= worst {
                // ties keep the earlier index
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(self.k);
        }
        best
    }

    /// Vote fractions per class and the winning class index.
    pub fn vote(&self, x: &[f64]) -> (Vec<f64>, usize) {
        let nn = self.neighbours(x);
        let mut counts = vec![0usize; self.classes.len()];
        for &(_, i) in &nn {
            counts[self.labels[i]] += 1;
        }
        let top = *counts.iter().max().expect("at least one class");
        let tied: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] == top).collect();
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            // nearest neighbour among tied classes; equal distances fall
            // back to the lowest class ordinal
            let nearest = nn
                .iter()
                .filter(|(_, i)| tied.contains(&self.labels[*i]))
                .map(|&(d, _)| d)
                .fold(f64::INFINITY, f64::min);
            nn.iter()
                .filter(|&&(d, i)| d == nearest && tied.contains(&self.labels[i]))
                .map(|&(_, i)| self.labels[i])
                .min()
                .expect("a tied class has a neighbour")
        };
        let k = nn.len() as f64;
        (counts.iter().map(|&c| c as f64 / k).collect(), winner)
    }
}
