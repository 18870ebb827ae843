//! Kruskal-Wallis, Dunn's post-hoc test with Šidák adjustment, and Pearson
//! correlation.
//!
//! Kruskal-Wallis p-values are exact (full enumeration of group
//! assignments) when the number of assignments is at most
//! [`EXACT_ENUMERATION_LIMIT`], and chi-square otherwise. The chi-square
//! value is always reported alongside.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const EXACT_ENUMERATION_LIMIT: f64 = 2.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMethod {
    Exact,
    ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KWResult {
    pub h: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub p_value_asymptotic: f64,
    pub method: PValueMethod,
    pub mean_ranks: Vec<f64>,
    pub group_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub group_a: usize,
    pub group_b: usize,
    pub z: f64,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocResult {
    pub alpha: f64,
    pub comparisons: Vec<PairwiseComparison>,
}

impl PosthocResult {
    /// Comparison for an unordered pair.
    pub fn pair(&self, a: usize, b: usize) -> Option<&PairwiseComparison> {
        let (a, b) = (a.min(b), a.max(b));
        self.comparisons.iter().find(|c| c.group_a == a && c.group_b == b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Average ranks (1-based) of the pooled sample, and Σ(t³ − t) over tie
/// groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

fn check_groups(groups: &[Vec<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::param("at least two groups are required"));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::param(format!("group {i} is empty")));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::param("samples must be finite"));
    }
    Ok(())
}

struct Pooled {
    ranks: Vec<f64>,
    sizes: Vec<usize>,
    ties: f64,
    n: usize,
}

fn pool(groups: &[Vec<f64>]) -> Pooled {
    let values: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, ties) = average_ranks(&values);
    Pooled {
        n: values.len(),
        ranks,
        sizes: groups.iter().map(Vec::len).collect(),
        ties,
    }
}

fn ln_multinomial(sizes: &[usize]) -> f64 {
    let ln_fact = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    ln_fact(sizes.iter().sum()) - sizes.iter().map(|&s| ln_fact(s)).sum::<f64>()
}

/// Σ R²/n over every assignment of the pooled ranks to groups of the given
/// sizes; returns the fraction with a statistic at least `observed`.
fn exact_upper_tail(ranks: &[f64], sizes: &[usize], observed: f64) -> f64 {
    struct Walk<'a> {
        ranks: &'a [f64],
        sizes: &'a [usize],
        room: Vec<usize>,
        sums: Vec<f64>,
        threshold: f64,
        hits: u64,
        total: u64,
    }
    impl Walk<'_> {
        fn go(&mut self, i: usize) {
            if i == self.ranks.len() {
                let s: f64 = self
                    .sums
                    .iter()
                    .zip(self.sizes)
                    .map(|(r, &n)| r * r / n as f64)
                    .sum();
                self.total += 1;
                if s >= self.threshold {
                    self.hits += 1;
                }
                return;
            }
            for g in 0..self.sizes.len() {
                if self.room[g] > 0 {
                    self.room[g] -= 1;
                    self.sums[g] += self.ranks[i];
                    self.go(i + 1);
                    self.sums[g] -= self.ranks[i];
                    self.room[g] += 1;
                }
            }
        }
    }
    let mut w = Walk {
        ranks,
        sizes,
        room: sizes.to_vec(),
        sums: vec![0.0; sizes.len()],
        threshold: observed - 1e-9 * observed.abs().max(1.0),
        hits: 0,
        total: 0,
    };
    w.go(0);
    w.hits as f64 / w.total as f64
}

pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KWResult> {
    check_groups(groups)?;
    let p = pool(groups);
    let n = p.n as f64;
    let mut rank_sums = vec![0.0; groups.len()];
    let mut offset = 0;
    for (g, &size) in p.sizes.iter().enumerate() {
        rank_sums[g] = p.ranks[offset..offset + size].iter().sum();
        offset += size;
    }
    let stat: f64 = rank_sums
        .iter()
        .zip(&p.sizes)
        .map(|(r, &s)| r * r / s as f64)
        .sum();
    let correction = if p.n > 1 { 1.0 - p.ties / (n * n * n - n) } else { 0.0 };
    let df = groups.len() - 1;
    let h = if correction <= 0.0 {
        0.0
    } else {
        ((12.0 / (n * (n + 1.0)) * stat - 3.0 * (n + 1.0)) / correction).max(0.0)
    };
    let p_value_asymptotic = if h == 0.0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .map_err(|e| Error::param(e.to_string()))?
            .sf(h)
    };
    let (p_value, method) = if correction <= 0.0 {
        (1.0, PValueMethod::Exact)
    } else if ln_multinomial(&p.sizes) <= EXACT_ENUMERATION_LIMIT.ln() {
        (exact_upper_tail(&p.ranks, &p.sizes, stat), PValueMethod::Exact)
    } else {
        (p_value_asymptotic, PValueMethod::ChiSquare)
    };
    Ok(KWResult {
        h,
        degrees_of_freedom: df,
        p_value,
        p_value_asymptotic,
        method,
        mean_ranks: rank_sums.iter().zip(&p.sizes).map(|(r, &s)| r / s as f64).collect(),
        group_sizes: p.sizes,
    })
}

/// Šidák adjustment for `m` comparisons: 1 − (1 − p)^m.
pub fn sidak(p: f64, m: usize) -> f64 {
    let adjusted = -f64::exp_m1(m as f64 * f64::ln_1p(-p));
    adjusted.clamp(p, 1.0)
}

pub fn dunn_sidak(groups: &[Vec<f64>], alpha: f64) -> Result<PosthocResult> {
    check_groups(groups)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let p = pool(groups);
    let n = p.n as f64;
    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for &size in &p.sizes {
        mean_ranks.push(p.ranks[offset..offset + size].iter().sum::<f64>() / size as f64);
        offset += size;
    }
    let variance = n * (n + 1.0) / 12.0 - if p.n > 1 { p.ties / (12.0 * (n - 1.0)) } else { 0.0 };
    let k = groups.len();
    let m = k * (k - 1) / 2;
    let mut comparisons = Vec::with_capacity(m);
    for a in 0..k {
        for b in a + 1..k {
            let se = (variance * (1.0 / p.sizes[a] as f64 + 1.0 / p.sizes[b] as f64)).sqrt();
            let z = if se > 0.0 { (mean_ranks[a] - mean_ranks[b]) / se } else { 0.0 };
            let raw = erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
            let adjusted_p = sidak(raw, m);
            comparisons.push(PairwiseComparison {
                group_a: a,
                group_b: b,
                z,
                p_value: raw,
                adjusted_p,
                significant: adjusted_p < alpha,
            });
        }
    }
    Ok(PosthocResult { alpha, comparisons })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::param(format!(
            "samples differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::param("pearson correlation needs n ≥ 3"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a zero-variance sample".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    // two-sided t-test p = I_{df/(df+t²)}(df/2, 1/2), with t² = df·r²/(1−r²)
    let one_minus = 1.0 - r * r;
    let p_value = if one_minus <= 0.0 {
        0.0
    } else {
        let t2 = df * r * r / one_minus;
        beta_reg(df / 2.0, 0.5, df / (df + t2))
    };
    Ok(CorrelationResult { r, p_value, n })
}
