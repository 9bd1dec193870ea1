//! Compressed sparse column storage with Matrix Market I/O.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Coordinate-list accumulator. Duplicate entries are summed by [`Triplets::build`].
#[derive(Debug, Clone, Default)]
pub struct Triplets<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> Triplets<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Triplets { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts by `(col, row)` and sums duplicates in insertion order.
    pub fn build(mut self) -> SparseMatrix<T> {
        // stable sort keeps insertion order among duplicates, so sums are deterministic
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..self.ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseMatrix { nrows: self.nrows, ncols: self.ncols, col_ptr, row_idx, values }
    }
}

/// Real sparse matrix in compressed column form with sorted row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    /// Row indices and values of column `c`.
    pub fn column(&self, c: usize) -> (&[usize], &[T]) {
        let r = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let (rows, vals) = self.column(col);
        rows.binary_search(&row).map(|k| vals[k]).unwrap_or_else(|_| T::zero())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::with_capacity(self.ncols, self.nrows, self.nnz());
        for (r, c, v) in self.iter() {
            t.push(c, r, v);
        }
        t.build()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = T::zero());
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == T::zero() {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    /// `y = A^T x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|c| {
                let mut s = T::zero();
                for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                    s += self.values[k] * x[self.row_idx[k]];
                }
                s
            })
            .collect()
    }

    /// Real matrix times complex vector.
    pub fn mul_vec_complex(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.nrows];
        for c in 0..self.ncols {
            let xc = x[c];
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let v = self.values[k];
                let yr = &mut y[self.row_idx[k]];
                yr.re += v * xc.re;
                yr.im += v * xc.im;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            d[r][c] = v;
        }
        d
    }

    /// Stacks four blocks `[[a, b], [c, d]]`; `None` blocks are zero.
    pub fn block2x2(
        a: Option<&Self>,
        b: Option<&Self>,
        c: Option<&Self>,
        d: Option<&Self>,
        n: usize,
    ) -> Self {
        let cap = [a, b, c, d].iter().flatten().map(|m| m.nnz()).sum();
        let mut t = Triplets::with_capacity(2 * n, 2 * n, cap);
        for (blk, ro, co) in [(a, 0, 0), (b, 0, n), (c, n, 0), (d, n, n)] {
            if let Some(m) = blk {
                assert_eq!((m.nrows, m.ncols), (n, n));
                for (r, cc, v) in m.iter() {
                    t.push(r + ro, cc + co, v);
                }
            }
        }
        t.build()
    }

    /// Writes coordinate Matrix Market (`real general`, 1-based, 17 significant digits).
    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))??;
        if !header.starts_with("%%MatrixMarket matrix coordinate real") {
            return Err(Error::Parse(format!("unsupported header `{header}`")));
        }
        let symmetric = header.contains("symmetric");
        let mut dims: Option<(usize, usize, usize)> = None;
        let mut t: Option<Triplets<T>> = None;
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
            match dims {
                None => {
                    if fields.len() != 3 {
                        return Err(Error::Parse(format!("bad size line `{line}`")));
                    }
                    let d = (parse_usize(fields[0])?, parse_usize(fields[1])?, parse_usize(fields[2])?);
                    t = Some(Triplets::with_capacity(d.0, d.1, d.2));
                    dims = Some(d);
                }
                Some(_) => {
                    if fields.len() != 3 {
                        return Err(Error::Parse(format!("bad entry line `{line}`")));
                    }
                    let r = parse_usize(fields[0])? - 1;
                    let c = parse_usize(fields[1])? - 1;
                    let v: f64 = fields[2].parse().map_err(|e| Error::Parse(format!("{}: {e}", fields[2])))?;
                    let tr = t.as_mut().unwrap();
                    tr.push(r, c, T::lit(v));
                    if symmetric && r != c {
                        tr.push(c, r, T::lit(v));
                    }
                }
            }
        }
        t.map(Triplets::build).ok_or_else(|| Error::Parse("missing size line".into()))
    }
}
