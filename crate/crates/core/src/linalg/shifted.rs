use alloc::vec::Vec;

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, MatRef, c64};

use super::{Matrix, all_finite_c, norm_fro_c, to_complex};
use crate::{Error, Result};

/// Ratio `‖x‖·‖sE − A‖₁ / ‖b‖` above which a solve is declared singular.
const GROWTH_LIMIT: f64 = 1e13;

/// Factory for factorizations of `sE − A` at varying complex shifts.
///
/// The sparse path computes the symbolic LU of the union pattern once and
/// reuses it for every shift.
#[derive(Clone, Debug)]
pub struct ShiftedSolver {
    n: usize,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Dense { e: Mat<f64>, a: Mat<f64> },
    Sparse(SparsePencil),
}

#[derive(Clone, Debug)]
struct SparsePencil {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    e_vals: Vec<f64>,
    a_vals: Vec<f64>,
    symbolic: SymbolicLu<usize>,
}

/// One factorized pencil `sE − A`.
pub struct ShiftedFactor {
    s: c64,
    norm1: f64,
    kind: FactorKind,
}

enum FactorKind {
    Dense(PartialPivLu<c64>),
    Sparse(Lu<usize, c64>),
}

impl ShiftedSolver {
    /// `e = None` means the identity.
    pub fn new(e: Option<&Matrix>, a: &Matrix) -> Result<Self> {
        let n = a.nrows();
        let sparse = a.is_sparse() || e.is_some_and(|e| e.is_sparse());
        if !sparse {
            let e = e.map(|e| e.to_dense()).unwrap_or_else(|| Mat::identity(n, n));
            return Ok(Self { n, kind: Kind::Dense { e, a: a.to_dense() } });
        }
        let at = a.triplets();
        let et = match e {
            Some(e) => e.triplets(),
            None => (0..n).map(|i| (i, i, 1.0)).collect(),
        };
        let mut pattern: Vec<(usize, usize)> = at.iter().chain(et.iter()).map(|&(i, j, _)| (j, i)).collect();
        pattern.extend((0..n).map(|i| (i, i)));
        pattern.sort_unstable();
        pattern.dedup();
        let mut col_ptr = alloc::vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(pattern.len());
        for &(j, i) in &pattern {
            col_ptr[j + 1] += 1;
            row_idx.push(i);
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        let pos = |i: usize, j: usize| -> usize {
            let lo = col_ptr[j];
            lo + row_idx[lo..col_ptr[j + 1]].binary_search(&i).expect("entry in union pattern")
        };
        let mut e_vals = alloc::vec![0.0; row_idx.len()];
        let mut a_vals = alloc::vec![0.0; row_idx.len()];
        for &(i, j, v) in &et {
            e_vals[pos(i, j)] += v;
        }
        for &(i, j, v) in &at {
            a_vals[pos(i, j)] += v;
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLu::try_new(sym).map_err(|e| Error::Factorization(alloc::format!("{e:?}")))?;
        Ok(Self { n, kind: Kind::Sparse(SparsePencil { col_ptr, row_idx, e_vals, a_vals, symbolic }) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Factorizes `sE − A`.
    pub fn factor(&self, s: c64) -> Result<ShiftedFactor> {
        let singular = || Error::SingularPencil { re: s.re, im: s.im, index: None };
        match &self.kind {
            Kind::Dense { e, a } => {
                let m = Mat::from_fn(self.n, self.n, |i, j| s * e[(i, j)] - c64::new(a[(i, j)], 0.0));
                if !all_finite_c(m.as_ref()) {
                    return Err(Error::NonFinite("shift"));
                }
                let norm1 = norm1_c(m.as_ref());
                let lu = m.partial_piv_lu();
                let u = lu.U();
                let mut umax = 0.0f64;
                let mut umin = f64::INFINITY;
                for i in 0..self.n {
                    umax = umax.max(u[(i, i)].norm());
                    umin = umin.min(u[(i, i)].norm());
                }
                if self.n > 0 && !(umin > 1e-15 * umax) {
                    return Err(singular());
                }
                Ok(ShiftedFactor { s, norm1, kind: FactorKind::Dense(lu) })
            }
            Kind::Sparse(p) => {
                let vals: Vec<c64> = p.e_vals.iter().zip(&p.a_vals).map(|(&e, &a)| s * e - c64::new(a, 0.0)).collect();
                let mut cols = alloc::vec![0.0f64; self.n];
                for j in 0..self.n {
                    cols[j] = vals[p.col_ptr[j]..p.col_ptr[j + 1]].iter().map(|v| v.norm()).sum();
                }
                let norm1 = cols.into_iter().fold(0.0, f64::max);
                let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &p.col_ptr, None, &p.row_idx);
                let mat = SparseColMatRef::new(sym, &vals);
                let lu = Lu::try_new_with_symbolic(p.symbolic.clone(), mat).map_err(|e| match e {
                    faer::sparse::linalg::LuError::SymbolicSingular { .. } => singular(),
                    other => Error::Factorization(alloc::format!("{other:?}")),
                })?;
                Ok(ShiftedFactor { s, norm1, kind: FactorKind::Sparse(lu) })
            }
        }
    }

    /// `(sE − A)⁻¹ B` for a real block `B`.
    pub fn solve_real_rhs(&self, s: c64, b: MatRef<'_, f64>) -> Result<Mat<c64>> {
        self.factor(s)?.solve(to_complex(b).as_ref())
    }
}

impl ShiftedFactor {
    pub fn shift(&self) -> c64 {
        self.s
    }

    fn check(&self, x: &Mat<c64>, b: MatRef<'_, c64>) -> Result<()> {
        let nb = norm_fro_c(b);
        let nx = norm_fro_c(x.as_ref());
        if !all_finite_c(x.as_ref()) || (nb > 0.0 && nx * self.norm1 > GROWTH_LIMIT * nb) {
            return Err(Error::SingularPencil { re: self.s.re, im: self.s.im, index: None });
        }
        Ok(())
    }

    /// `(sE − A)⁻¹ b`.
    pub fn solve(&self, b: MatRef<'_, c64>) -> Result<Mat<c64>> {
        let mut x = b.to_owned();
        match &self.kind {
            FactorKind::Dense(lu) => lu.solve_in_place(x.as_mut()),
            FactorKind::Sparse(lu) => lu.solve_in_place(x.as_mut()),
        }
        self.check(&x, b)?;
        Ok(x)
    }

    /// `(sE − A)⁻ᵀ b` (plain transpose, no conjugation).
    pub fn solve_transpose(&self, b: MatRef<'_, c64>) -> Result<Mat<c64>> {
        let mut x = b.to_owned();
        match &self.kind {
            FactorKind::Dense(lu) => lu.solve_transpose_in_place(x.as_mut()),
            FactorKind::Sparse(lu) => lu.solve_transpose_in_place(x.as_mut()),
        }
        self.check(&x, b)?;
        Ok(x)
    }
}

fn norm1_c(m: MatRef<'_, c64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl core::fmt::Debug for ShiftedFactor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ShiftedFactor").field("s", &self.s).field("norm1", &self.norm1).finish()
    }
}
