//! Compressed sparse row storage for the incidence and metric operators.

use std::ops::{Add, Mul};

use rayon::prelude::*;

/// Rows above this count are multiplied in parallel.
const PAR_ROWS: usize = 4096;

/// A CSR matrix. Column indices within a row are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

/// Real-valued operator.
pub type CsrMatrix = Csr<f64>;
/// Signed incidence (coboundary) matrix with entries in {-1, 0, 1}.
pub type Incidence = Csr<i32>;

impl<T> Csr<T>
where
    T: Copy + Default + PartialEq + Add<Output = T> + Mul<Output = T> + Send + Sync,
{
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in their order of appearance, so a deterministic
    /// triplet stream yields a bitwise deterministic matrix.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                let slot = data.last_mut().unwrap();
                *slot = *slot + v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        let zero = T::default();
        if self.data.iter().all(|&v| v != zero) {
            return;
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k] != zero {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.data[span])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => T::default(),
        }
    }

    /// Iterates over all stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![T::default(); self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let slot = next[c];
                indices[slot] = r;
                data[slot] = self.data[k];
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            data,
        }
    }

    /// Sparse product `self * rhs` (Gustavson's row-by-row algorithm).
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "matmul shape mismatch");
        let rows: Vec<(Vec<usize>, Vec<T>)> = (0..self.nrows)
            .into_par_iter()
            .map(|r| {
                let mut acc: Vec<(usize, T)> = Vec::new();
                let (cols, vals) = self.row(r);
                for (&k, &a) in cols.iter().zip(vals) {
                    let (rc, rv) = rhs.row(k);
                    for (&c, &b) in rc.iter().zip(rv) {
                        acc.push((c, a * b));
                    }
                }
                acc.sort_by_key(|e| e.0);
                let mut idx = Vec::with_capacity(acc.len());
                let mut val: Vec<T> = Vec::with_capacity(acc.len());
                for (c, v) in acc {
                    if idx.last() == Some(&c) {
                        let slot = val.last_mut().unwrap();
                        *slot = *slot + v;
                    } else {
                        idx.push(c);
                        val.push(v);
                    }
                }
                (idx, val)
            })
            .collect();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for (idx, val) in rows {
            indices.extend(idx);
            data.extend(val);
            indptr.push(indices.len());
        }
        let mut m = Self {
            nrows: self.nrows,
            ncols: rhs.ncols,
            indptr,
            indices,
            data,
        };
        m.drop_zeros();
        m
    }

    /// Submatrix with the given rows and columns, renumbered in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for &r in rows {
            let (rc, rv) = self.row(r);
            let mut entries: Vec<(usize, T)> = rc
                .iter()
                .zip(rv)
                .filter(|(c, _)| col_map[**c] != usize::MAX)
                .map(|(&c, &v)| (col_map[c], v))
                .collect();
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: rows.len(),
            ncols: cols.len(),
            indptr,
            indices,
            data,
        }
    }

    /// Rowwise product with a dense vector.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::default(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "mul_vec: input length");
        assert_eq!(y.len(), self.nrows, "mul_vec: output length");
        let row_dot = |r: usize| {
            let (cols, vals) = self.row(r);
            cols.iter()
                .zip(vals)
                .fold(T::default(), |acc, (&c, &v)| acc + v * x[c])
        };
        if self.nrows >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = row_dot(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, out)| *out = row_dot(r));
        }
    }

    /// `selfᵀ x`, computed without materialising the transpose.
    pub fn mul_transpose_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows, "mul_transpose_vec: input length");
        let mut y = vec![T::default(); self.ncols];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] = y[c] + v * x[r];
            }
        }
        y
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn map<U, F: Fn(T) -> U>(&self, f: F) -> Csr<U> {
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == T::default())
    }
}

impl Incidence {
    pub fn to_real(&self) -> CsrMatrix {
        self.map(f64::from)
    }
}

impl CsrMatrix {
    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                let s: f64 = cols.iter().zip(vals).map(|(&c, &v)| v * y[c]).sum();
                x[r] * s
            })
            .sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|` over the stored pattern.
    pub fn asymmetry(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other` over the union of patterns.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<(usize, usize, f64)> = self.iter().collect();
        t.extend(other.iter().map(|(r, c, v)| (r, c, s * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn to_faer(&self) -> faer::sparse::SparseColMat<usize, f64> {
        let t: Vec<faer::sparse::Triplet<usize, usize, f64>> = self
            .iter()
            .map(|(r, c, v)| faer::sparse::Triplet::new(r, c, v))
            .collect();
        faer::sparse::SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .expect("valid triplets")
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            d[r][c] = v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            2,
            3,
            &[(0, 2, 1.0), (0, 0, 2.0), (1, 1, 3.0), (0, 2, 0.5), (1, 0, -1.0)],
        )
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = sample();
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 4);
    }

    #[test]
    fn transpose_and_products_agree() {
        let m = sample();
        let t = m.transpose();
        assert_eq!(t.get(2, 0), 1.5);
        let x = [1.0, 2.0];
        assert_eq!(m.mul_transpose_vec(&x), t.mul_vec(&x));
        let mtm = t.matmul(&m);
        assert_eq!(mtm.get(0, 0), 5.0);
        assert!(mtm.asymmetry() == 0.0);
    }

    #[test]
    fn select_renumbers() {
        let m = sample();
        let s = m.select(&[1], &[1, 0]);
        assert_eq!(s.get(0, 0), 3.0);
        assert_eq!(s.get(0, 1), -1.0);
    }

    #[test]
    fn cancelling_entries_are_dropped() {
        let m = Incidence::from_triplets(1, 2, &[(0, 0, 1), (0, 0, -1), (0, 1, 1)]);
        assert_eq!(m.nnz(), 1);
    }
}
