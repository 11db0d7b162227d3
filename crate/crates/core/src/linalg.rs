//! Small dense linear algebra: row-major square matrices, Cholesky with
//! pivot diagnostics, symmetric spectra and the power-iteration operator norm.

use crate::error::{Error, Result};
use serde::{Serialize, Serializer};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
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
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `out = self * x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = dot(self.row(i), x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = self^T * x`
    pub fn mul_t_vec_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &xi) in x.iter().enumerate().take(self.n) {
            if xi != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.row(i)) {
                    *o += a * xi;
                }
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self[(i, j)] == if i == j { 1.0 } else { 0.0 }))
    }

    /// Largest |a_ij - a_ji|, with its location.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            for j in 0..i {
                let diff = (self[(i, j)] - self[(j, i)]).abs();
                if diff > tol {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
            }
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular `L` with `a = L L^T`.
///
/// Pivots within `zero_tol * max_diag` of zero are treated as exact zeros
/// (the matrix is semidefinite along that direction) and their column is
/// cleared; anything more negative is reported with its index.
pub fn cholesky(a: &Matrix, zero_tol: f64) -> Result<Matrix> {
    let n = a.dim();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = zero_tol * scale;
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot > tol {
            let d = pivot.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        } else if pivot >= -tol {
            // semidefinite direction: column stays zero
        } else {
            return Err(Error::Cholesky { index: j, pivot });
        }
    }
    Ok(l)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.dim();
    if n == 0 {
        return Vec::new();
    }
    let m = nalgebra::DMatrix::from_row_slice(n, n, a.as_slice());
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    symmetric_eigenvalues(a).first().copied().unwrap_or(0.0)
}

const POWER_MAX_ITER: usize = 10_000;

/// Operator norm (largest absolute eigenvalue) of a symmetric matrix by
/// power iteration on `C^2`, whose Rayleigh quotient is `|lambda|^2`.
pub fn operator_norm(c: &Matrix) -> Result<f64> {
    c.check_symmetric(1e-12)?;
    let n = c.dim();
    if n == 0 || c.as_slice().iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    // deterministic start vector with no special structure
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.618_033_988_75 * ((i * 7 + 3) % 11) as f64).collect();
    normalize(&mut v);
    let mut cv = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut stable = 0;
    for _ in 0..POWER_MAX_ITER {
        c.mul_vec_into(&v, &mut cv);
        c.mul_vec_into(&cv, &mut w);
        let rq = dot(&v, &w);
        let norm_w = dot(&w, &w).sqrt();
        if norm_w == 0.0 {
            // start vector in the null space: perturb deterministically
            v.iter_mut().enumerate().for_each(|(i, x)| *x += (i + 1) as f64);
            normalize(&mut v);
            continue;
        }
        v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / norm_w);
        if (rq - prev).abs() <= 1e-15 * rq.abs() {
            stable += 1;
            if stable >= 3 {
                return Ok(rq.max(0.0).sqrt());
            }
        } else {
            stable = 0;
        }
        prev = rq;
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITER,
    })
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}
