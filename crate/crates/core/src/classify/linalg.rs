//! Dense symmetric matrices and the Cholesky factorization used by the
//! discriminant classifiers.

use crate::error::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Adds `(x - mean)(x - mean)ᵀ` (upper and lower halves).
    pub fn add_outer_centered(&mut self, x: &[f64], mean: &[f64]) {
        let n = self.n;
        for i in 0..n {
            let di = x[i] - mean[i];
            if di == 0.0 {
                continue;
            }
            let row = &mut self.data[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] += di * (x[j] - mean[j]);
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += v;
        }
    }

    /// Ratio of the largest to the smallest diagonal entry; a cheap
    /// conditioning diagnostic reported when factorization fails.
    pub fn diagonal_spread(&self) -> f64 {
        let diag = (0..self.n).map(|i| self.get(i, i));
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }

    /// `(x - mean)ᵀ self (x - mean)`.
    pub fn quadratic_form(&self, x: &[f64], mean: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(x.iter().zip(mean).map(|(a, b)| a - b));
        let d = &scratch[..];
        let mut acc = 0.0;
        for i in 0..self.n {
            let row = self.row(i);
            let mut s = 0.0;
            for j in 0..self.n {
                s += row[j] * d[j];
            }
            acc += d[i] * s;
        }
        acc
    }
}

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

/// Pivots below this fraction of the largest diagonal entry are treated as
/// zero.
const PIVOT_TOLERANCE: f64 = 1e-13;

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.n;
        let max_diag = (0..n).map(|i| a.get(i, i)).fold(0.0f64, f64::max);
        let floor = PIVOT_TOLERANCE * max_diag;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > floor) || !d.is_finite() || max_diag <= 0.0 {
                return Err(Error::Numerical {
                    message: format!(
                        "covariance is not positive definite (pivot {j} of {n} is {d:.3e})"
                    ),
                    condition: a.diagonal_spread().max(if d > 0.0 { max_diag / d } else { f64::INFINITY }),
                });
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { l })
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.n).map(|i| self.l.get(i, i).ln()).sum::<f64>()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }

    /// `A⁻¹`, symmetrized.
    pub fn inverse(&self) -> Matrix {
        let n = self.l.n;
        let mut inv = Matrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, v);
                inv.set(j, i, v);
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_invert() {
        let a = Matrix::from_rows(&[
            vec![4.0, 2.0, 0.6],
            vec![2.0, 2.0, 0.5],
            vec![0.6, 0.5, 3.0],
        ]);
        let c = Cholesky::factor(&a).unwrap();
        let inv = c.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| a.get(i, k) * inv.get(k, j)).sum();
                assert!((p - f64::from(u8::from(i == j))).abs() < 1e-12);
            }
        }
        // det = 4(6-0.25) - 2(6-0.3) + 0.6(1-1.2)
        let det: f64 = 4.0 * 5.75 - 2.0 * 5.7 + 0.6 * (1.0 - 1.2);
        assert!((c.log_det() - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_reports_condition() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        match Cholesky::factor(&a) {
            Err(Error::Numerical { condition, .. }) => assert!(condition > 1e12),
            other => panic!("expected numerical error, got {other:?}"),
        }
        assert!(Cholesky::factor(&Matrix::zeros(3)).is_err());
    }
}
