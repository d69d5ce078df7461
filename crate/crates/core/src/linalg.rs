//! Dense square-matrix helpers sized for desk-scale games (n up to a few
//! hundred). Row-major storage, partial-pivot LU for determinants, solves,
//! and condition estimates.

use serde::Serialize;

use crate::{Error, Result};

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Matrix { n, data })
    }

    pub fn zeros(n: usize) -> Matrix {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    /// M v
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| dot(self.row(i), v))
            .collect()
    }

    /// Mᵀ v
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let vi = v[i];
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += vi * m;
            }
        }
        out
    }

    /// M Mᵀ
    pub fn mul_transpose(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm1(&self) -> f64 {
        let mut best = 0.0_f64;
        for j in 0..self.n {
            let s: f64 = (0..self.n).map(|i| self.get(i, j).abs()).sum();
            best = best.max(s);
        }
        best
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}

/// Partial-pivot LU factorization.
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

pub fn lu_factor(m: &Matrix) -> Lu {
    let n = m.n;
    let mut lu = m.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut singular = false;

    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for i in (k + 1)..n {
            let v = lu[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let f = lu[i * n + k] / pivot;
            lu[i * n + k] = f;
            for j in (k + 1)..n {
                lu[i * n + j] -= f * lu[k * n + j];
            }
        }
    }

    Lu {
        n,
        lu,
        perm,
        sign,
        singular,
    }
}

impl Lu {
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        let mut d = self.sign;
        for k in 0..self.n {
            d *= self.lu[k * self.n + k];
        }
        d
    }

    /// Solve A x = b. Returns None when the factorization is singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        if self.singular {
            return None;
        }
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            let d = self.lu[i * n + i];
            if d == 0.0 {
                return None;
            }
            x[i] = s / d;
        }
        Some(x)
    }
}

/// Inverse through LU column solves; None when singular.
pub fn inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.n;
    let lu = lu_factor(m);
    if lu.is_singular() {
        return None;
    }
    let mut inv = Matrix::zeros(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = lu.solve(&e)?;
        e[j] = 0.0;
        if col.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for i in 0..n {
            inv.set(i, j, col[i]);
        }
    }
    Some(inv)
}

/// 1-norm condition number κ₁ = ‖A‖₁ ‖A⁻¹‖₁; +∞ for singular input.
pub fn cond1(m: &Matrix) -> f64 {
    match inverse(m) {
        Some(inv) => m.norm1() * inv.norm1(),
        None => f64::INFINITY,
    }
}
