//! Envelope (skyline) Cholesky factorization for the banded SPD systems
//! produced by the 5-point stencil in row-major cell order.

use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let o = 4 * c;
        acc[0] += a[o] * b[o];
        acc[1] += a[o + 1] * b[o + 1];
        acc[2] += a[o + 2] * b[o + 2];
        acc[3] += a[o + 3] * b[o + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for o in 4 * chunks..n {
        s += a[o] * b[o];
    }
    s
}

/// Lower factor `L` with `A = L Lᵀ`, stored row by row over each row's
/// envelope `first[i]..=i`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors the symmetric matrix given by its lower-triangular entries
    /// `(row, col, value)` with `col ≤ row`.
    pub fn factor(n: usize, lower: &[(usize, usize, f64)]) -> Result<Self> {
        let mut first: Vec<usize> = (0..n).collect();
        for &(r, c, _) in lower {
            debug_assert!(c <= r);
            first[r] = first[r].min(c);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut data = vec![0.0; total];
        for &(r, c, v) in lower {
            data[start[r] + (c - first[r])] += v;
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = data.split_at_mut(start[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[start[j]..start[j] + (j - fj + 1)];
                let s = row_i[j - fi] - dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                row_i[j - fi] = s / row_j[j - fj];
            }
            let d = row_i[i - fi] - dot(&row_i[..i - fi], &row_i[..i - fi]);
            if !(d > 0.0) {
                return Err(Error::Domain(format!("matrix is not positive definite (pivot {i} = {d:e})")));
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky { first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn stored_entries(&self) -> usize {
        self.data.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = x[i] - dot(&row[..i - fi], &x[fi..i]);
            x[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let xi = x[i] / row[i - fi];
            x[i] = xi;
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
    }
}
