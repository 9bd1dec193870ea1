//! Envelope (skyline) Cholesky factorization for sparse SPD matrices.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::SparseMatrix;

/// Lower-triangular profile factor `A = L L^T`.
///
/// Row `i` stores `L[i][first[i]..=i]` contiguously.
#[derive(Debug, Clone)]
pub struct SpdFactor<T> {
    n: usize,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<T>,
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

impl<T: Real> SpdFactor<T> {
    /// Factors a symmetric matrix; only the lower triangle is read.
    pub fn new(a: &SparseMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
        }
        let mut first: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let (rows, _) = a.column(c);
            for &r in rows {
                if r > c && c < first[r] {
                    first[r] = c;
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            offsets.push(total);
            total += i - first[i] + 1;
        }
        offsets.push(total);
        let mut data = vec![T::zero(); total];
        for c in 0..n {
            let (rows, vals) = a.column(c);
            for (&r, &v) in rows.iter().zip(vals) {
                if r >= c {
                    data[offsets[r] + c - first[r]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = data.split_at_mut(offsets[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[offsets[j]..offsets[j + 1]];
                let s = row_i[j - fi] - dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                row_i[j - fi] = s / row_j[j - fj];
            }
            let d = row_i[i - fi] - dot(&row_i[..i - fi], &row_i[..i - fi]);
            if !(d > T::zero()) {
                return Err(Error::NotSpd { row: i, pivot: d.to_f64_lossy() });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(SpdFactor { n, first, offsets, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn row(&self, i: usize) -> &[T] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let fi = self.first[i];
            let row = self.row(i);
            let s = b[i] - dot(&row[..i - fi], &b[fi..i]);
            b[i] = s / row[i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            let xi = b[i] / row[i - fi];
            b[i] = xi;
            for (bk, &l) in b[fi..i].iter_mut().zip(&row[..i - fi]) {
                *bk -= l * xi;
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Complex right-hand side, solved as two real systems.
    pub fn solve_complex(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut re: Vec<T> = b.iter().map(|z| z.re).collect();
        let mut im: Vec<T> = b.iter().map(|z| z.im).collect();
        self.solve_in_place(&mut re);
        self.solve_in_place(&mut im);
        re.into_iter().zip(im).map(|(r, i)| Complex::new(r, i)).collect()
    }
}
