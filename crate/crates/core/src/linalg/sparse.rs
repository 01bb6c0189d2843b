use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;
use faer::c64;

/// Compressed sparse column storage with sorted, duplicate-free row indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMat {
    /// Assembles from triplets. Duplicates are summed; explicit zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut cols = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (i, j, mut v) = sorted[k];
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            k += 1;
            while k < sorted.len() && sorted[k].0 == i && sorted[k].1 == j {
                v += sorted[k].2;
                k += 1;
            }
            if v != 0.0 {
                row_idx.push(i);
                values.push(v);
                cols.push(j);
            }
        }
        for &j in &cols {
            col_ptr[j + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Self { nrows, ncols, col_ptr, row_idx, values }
    }

    pub fn from_dense(m: &Mat<f64>) -> Self {
        let mut t = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
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

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |k| (self.row_idx[k], j, self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.iter().map(|(i, j, v)| (i, j, alpha * v)).collect();
        t.extend(other.iter().map(|(i, j, v)| (i, j, beta * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Sparse product via a dense column accumulator.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows);
        let mut acc = vec![0.0f64; self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut touched = Vec::new();
        let mut t = Vec::new();
        for j in 0..rhs.ncols {
            touched.clear();
            for kk in rhs.col_ptr[j]..rhs.col_ptr[j + 1] {
                let k = rhs.row_idx[kk];
                let b = rhs.values[kk];
                for ii in self.col_ptr[k]..self.col_ptr[k + 1] {
                    let i = self.row_idx[ii];
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        touched.push(i);
                    }
                    acc[i] += self.values[ii] * b;
                }
            }
            for &i in &touched {
                t.push((i, j, acc[i]));
            }
        }
        Self::from_triplets(self.nrows, rhs.ncols, &t)
    }

    pub fn mul_dense(&self, x: faer::MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(self.ncols, x.nrows());
        let mut out = Mat::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.ncols {
                let xj = x[(j, c)];
                if xj == 0.0 {
                    continue;
                }
                for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                    out[(self.row_idx[k], c)] += self.values[k] * xj;
                }
            }
        }
        out
    }

    pub fn mul_dense_c(&self, x: faer::MatRef<'_, c64>) -> Mat<c64> {
        assert_eq!(self.ncols, x.nrows());
        let mut out = Mat::<c64>::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.ncols {
                let xj = x[(j, c)];
                for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                    out[(self.row_idx[k], c)] += xj * self.values[k];
                }
            }
        }
        out
    }

    /// `self^T x` without forming the transpose.
    pub fn tr_mul_dense(&self, x: faer::MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(self.nrows, x.nrows());
        let mut out = Mat::zeros(self.ncols, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.ncols {
                let mut s = 0.0;
                for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                    s += self.values[k] * x[(self.row_idx[k], c)];
                }
                out[(j, c)] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[k]] += self.values[k] * xj;
            }
        }
    }

    /// Half-bandwidth-like profile: for each column j the smallest row index present
    /// in rows/columns <= j of the symmetric pattern.
    pub fn envelope_first(&self) -> Vec<usize> {
        let mut first: Vec<usize> = (0..self.nrows).collect();
        for (i, j, _) in self.iter() {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if lo < first[hi] {
                first[hi] = lo;
            }
        }
        first
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMat::from_triplets(3, 3, &[(2, 0, 1.0), (0, 0, 2.0), (2, 0, 0.5), (1, 1, 1.0), (1, 1, -1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(2, 0), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.col_ptr(), &[0, 2, 2, 2]);
        assert_eq!(m.row_idx(), &[0, 2]);
    }

    #[test]
    fn products_and_profile() {
        let m = SparseMat::from_triplets(4, 4, &[(0, 0, 1.0), (3, 1, 2.0), (1, 2, -1.0), (2, 3, 4.0)]);
        let mut y = [0.0; 4];
        m.mul_vec(&[1.0, 1.0, 2.0, 0.5], &mut y);
        assert_eq!(y, [1.0, -2.0, 2.0, 2.0]);
        let x = Mat::from_fn(4, 1, |i, _| i as f64);
        assert_eq!(m.tr_mul_dense(x.as_ref()), m.transpose().to_dense() * &x);
        assert_eq!(m.envelope_first(), vec![0, 1, 1, 1]);
        assert_eq!(SparseMat::identity(3).to_dense(), Mat::<f64>::identity(3, 3));
    }
}
