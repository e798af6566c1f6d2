//! Small sparse and banded linear-algebra kernels.

use crate::error::{Error, Result};
use crate::num::{axpy, dot, norm_inf, Real};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a matrix row by row; `row(r)` yields `(column, value)` pairs in any order.
    pub fn from_rows<I>(rows: usize, cols: usize, mut row: impl FnMut(usize) -> I) -> Self
    where
        I: IntoIterator<Item = (usize, T)>,
    {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..rows {
            let mut entries: Vec<(usize, T)> = row(r).into_iter().filter(|(_, v)| *v != T::zero()).collect();
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                debug_assert!(c < cols);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { rows, cols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, n, |r| [(r, T::one())])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| self.row(r).fold(T::zero(), |s, (c, v)| s + v * x[c])).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut buckets: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                buckets[c].push((r, v));
            }
        }
        Self::from_rows(self.cols, self.rows, |c| std::mem::take(&mut buckets[c]))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.cols]; self.rows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let t = self.transpose();
        (0..self.rows).all(|r| {
            let a: Vec<_> = self.row(r).collect();
            let b: Vec<_> = t.row(r).collect();
            a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= tol)
        })
    }

    /// Largest `|c - r|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.rows).flat_map(|r| self.row(r).map(move |(c, _)| c.abs_diff(r))).max().unwrap_or(0)
    }
}

/// Cholesky factor of a symmetric positive definite band matrix, stored by rows of
/// the lower triangle: `l[i][k]` holds `L[i, i - bw + k]`.
#[derive(Debug, Clone)]
pub struct BandCholesky<T> {
    n: usize,
    bw: usize,
    l: Vec<T>,
}

impl<T: Real> BandCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::numeric("band Cholesky needs a square matrix"));
        }
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut l = vec![T::zero(); n * w];
        for r in 0..n {
            for (c, v) in a.row(r) {
                if c <= r {
                    l[r * w + (c + bw - r)] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = l[i * w + (j + bw - i)];
                for k in jlo..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::numeric(format!("matrix not positive definite at row {i}")));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + 1 + bw).min(n) {
                s -= self.l[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        y
    }
}

/// Conjugate gradients for symmetric positive definite systems.
pub fn conjugate_gradient<T: Real>(a: &CsrMatrix<T>, b: &[T], tol: T, max_iter: usize) -> Result<Vec<T>> {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = tol * norm_inf(b).max(T::min_positive_value());
    for _ in 0..max_iter {
        if norm_inf(&r) <= stop {
            return Ok(x);
        }
        let ap = a.mul_vec(&p);
        let alpha = rr / dot(&p, &ap);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    if norm_inf(&r) <= stop {
        Ok(x)
    } else {
        Err(Error::numeric("conjugate gradient did not converge"))
    }
}

/// In-place dense Cholesky of a small row-major SPD matrix; returns the lower factor.
pub fn dense_cholesky<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}
