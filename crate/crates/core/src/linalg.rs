//! Small dense linear algebra: row-major matrices, Cholesky factorization,
//! triangular solves, column projections and a one-sided Jacobi SVD used for
//! rank diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{fabs, sqrt};
use crate::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::validation(alloc::format!(
                "matrix data has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::validation("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut m = Matrix::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::validation("columns differ in length"));
            }
            for (i, &v) in c.iter().enumerate() {
                m.data[i * m.cols + j] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self.set(i, j, v);
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(fabs(v)))
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += vi * x;
            }
        }
        out
    }

    /// `selfᵀ · diag(w) · self`.
    pub fn weighted_gram(&self, w: &[f64]) -> Matrix {
        assert_eq!(self.rows, w.len());
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for (i, &wi) in w.iter().enumerate() {
            let r = self.row(i);
            for a in 0..p {
                let ra = wi * r[a];
                if ra == 0.0 {
                    continue;
                }
                let grow = &mut g.data[a * p..a * p + a + 1];
                for (b, gv) in grow.iter_mut().enumerate() {
                    *gv += ra * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                let v = g.get(a, b);
                g.set(b, a, v);
            }
        }
        g
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max(fabs(self.get(i, j) - self.get(j, i)) / scale);
            }
        }
        worst
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix, reading the lower triangle.
    pub fn new(a: &Matrix) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "Cholesky needs a square matrix");
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = sqrt(d);
            l.set(j, j, d);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows;
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * b[k];
            }
            b[i] = s / self.l.get(i, i);
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `A⁻¹`, used only for diagnostics and tests.
    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            inv.set_column(j, &col);
        }
        inv
    }
}

/// Singular values (descending) and right singular vectors of an `n x p`
/// matrix, by one-sided Jacobi rotations.
#[derive(Debug, Clone)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// Column `k` is the right singular vector for `singular_values[k]`.
    pub v: Matrix,
}

pub fn svd(a: &Matrix) -> Svd {
    let n = a.rows;
    let p = a.cols;
    // Column-major working copy: cols[j] is column j.
    let mut cols: Vec<Vec<f64>> = (0..p).map(|j| a.column(j)).collect();
    let mut v = Matrix::identity(p);
    for _sweep in 0..60 {
        let mut rotated = false;
        for j in 0..p {
            for k in j + 1..p {
                let alpha = dot(&cols[j], &cols[j]);
                let beta = dot(&cols[k], &cols[k]);
                let gamma = dot(&cols[j], &cols[k]);
                if gamma == 0.0 || fabs(gamma) <= 1e-15 * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (fabs(zeta) + sqrt(1.0 + zeta * zeta));
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..n {
                    let x = cols[j][i];
                    let y = cols[k][i];
                    cols[j][i] = c * x - s * y;
                    cols[k][i] = s * x + c * y;
                }
                for i in 0..p {
                    let x = v.get(i, j);
                    let y = v.get(i, k);
                    v.set(i, j, c * x - s * y);
                    v.set(i, k, s * x + c * y);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = cols.iter().map(|c| sqrt(dot(c, c))).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut sorted_v = Matrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..p {
            sorted_v.set(i, dst, v.get(i, src));
        }
    }
    Svd {
        singular_values: order.iter().map(|&k| norms[k]).collect(),
        v: sorted_v,
    }
}

/// Orthonormal basis for the column space of `f` (modified Gram-Schmidt with
/// one reorthogonalization pass). Fails when `f` is numerically rank deficient.
pub fn orthonormal_basis(f: &Matrix) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(f.cols);
    for j in 0..f.cols {
        let mut c = f.column(j);
        let original = sqrt(dot(&c, &c));
        for _pass in 0..2 {
            for q in &basis {
                let r = dot(q, &c);
                for (ci, qi) in c.iter_mut().zip(q) {
                    *ci -= r * qi;
                }
            }
        }
        let norm = sqrt(dot(&c, &c));
        if !(original > 0.0) || norm <= 1e-10 * original {
            return Err(Error::validation(alloc::format!(
                "projection basis is rank deficient at column {j}"
            )));
        }
        c.iter_mut().for_each(|v| *v /= norm);
        basis.push(c);
    }
    Ok(basis)
}

/// `(I - Q Qᵀ) x` for an orthonormal basis `Q`, applied twice for accuracy.
pub fn project_out(basis: &[Vec<f64>], x: &mut [f64]) {
    for _pass in 0..2 {
        for q in basis {
            let r = dot(q, x);
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi -= r * qi;
            }
        }
    }
}
