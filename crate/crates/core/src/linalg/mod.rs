//! Matrix storage and the dense/sparse kernels shared by the reduction code.

mod envelope;
pub mod schur;
mod shifted;
mod sparse;

use alloc::vec;
use alloc::vec::Vec;

use faer::prelude::*;
use faer::{Mat, MatRef, Side, c64};
use num_traits::Float;

pub use envelope::envelope_cholesky_ok;
pub use shifted::{ShiftedFactor, ShiftedSolver};
pub use sparse::SparseMat;

/// Matrices with dimension below this are stored densely.
pub const DENSE_BELOW: usize = 500;

/// Default size limit for dense cubic algorithms (Lyapunov, balancing).
pub const DEFAULT_DENSE_CEILING: usize = 2000;

/// A real matrix stored densely or in compressed sparse columns.
#[derive(Clone, Debug)]
pub enum Matrix {
    Dense(Mat<f64>),
    Sparse(SparseMat),
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Matrix::Sparse(a), Matrix::Sparse(b)) => a == b,
            _ => {
                self.nrows() == other.nrows()
                    && self.ncols() == other.ncols()
                    && self.to_dense() == other.to_dense()
            }
        }
    }
}

impl From<Mat<f64>> for Matrix {
    fn from(m: Mat<f64>) -> Self {
        Matrix::Dense(m)
    }
}

impl From<SparseMat> for Matrix {
    fn from(m: SparseMat) -> Self {
        Matrix::Sparse(m)
    }
}

impl Matrix {
    /// Builds from triplets, choosing dense storage for small shapes.
    pub fn from_triplets(nrows: usize, ncols: usize, t: &[(usize, usize, f64)]) -> Self {
        let s = SparseMat::from_triplets(nrows, ncols, t);
        if nrows.max(ncols) < DENSE_BELOW {
            Matrix::Dense(s.to_dense())
        } else {
            Matrix::Sparse(s)
        }
    }

    pub fn identity(n: usize) -> Self {
        if n < DENSE_BELOW {
            Matrix::Dense(Mat::identity(n, n))
        } else {
            Matrix::Sparse(SparseMat::identity(n))
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, &[])
    }

    /// Re-selects storage according to the dense threshold.
    pub fn normalized(self) -> Self {
        let big = self.nrows().max(self.ncols()) >= DENSE_BELOW;
        match self {
            Matrix::Dense(m) if big => Matrix::Sparse(SparseMat::from_dense(&m)),
            Matrix::Sparse(s) if !big => Matrix::Dense(s.to_dense()),
            other => other,
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.nrows(),
            Matrix::Sparse(s) => s.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.ncols(),
            Matrix::Sparse(s) => s.ncols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Matrix::Dense(m) => m[(i, j)],
            Matrix::Sparse(s) => s.get(i, j),
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> SparseMat {
        match self {
            Matrix::Dense(m) => SparseMat::from_dense(m),
            Matrix::Sparse(s) => s.clone(),
        }
    }

    /// Nonzero entries as `(row, col, value)`, column-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match self {
            Matrix::Dense(m) => {
                let mut t = Vec::new();
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)] != 0.0 {
                            t.push((i, j, m[(i, j)]));
                        }
                    }
                }
                t
            }
            Matrix::Sparse(s) => s.iter().collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            Matrix::Dense(m) => all_finite(m.as_ref()),
            Matrix::Sparse(s) => s.values().iter().all(|v| v.is_finite()),
        }
    }

    pub fn transpose(&self) -> Self {
        match self {
            Matrix::Dense(m) => Matrix::Dense(m.transpose().to_owned()),
            Matrix::Sparse(s) => Matrix::Sparse(s.transpose()),
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        match self {
            Matrix::Dense(m) => Matrix::Dense(Mat::from_fn(m.nrows(), m.ncols(), |i, j| alpha * m[(i, j)])),
            Matrix::Sparse(s) => Matrix::Sparse(s.lin_comb(alpha, &SparseMat::from_triplets(s.nrows(), s.ncols(), &[]), 0.0)),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: f64, other: &Matrix, beta: f64) -> Self {
        assert_eq!((self.nrows(), self.ncols()), (other.nrows(), other.ncols()));
        match (self, other) {
            (Matrix::Sparse(a), Matrix::Sparse(b)) => Matrix::Sparse(a.lin_comb(alpha, b, beta)),
            _ => {
                let (a, b) = (self.to_dense(), other.to_dense());
                Matrix::Dense(Mat::from_fn(a.nrows(), a.ncols(), |i, j| alpha * a[(i, j)] + beta * b[(i, j)]))
            }
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Self {
        match (self, rhs) {
            (Matrix::Sparse(a), Matrix::Sparse(b)) => Matrix::Sparse(a.matmul(b)),
            (Matrix::Sparse(a), Matrix::Dense(b)) => Matrix::Dense(a.mul_dense(b.as_ref())),
            (Matrix::Dense(a), Matrix::Sparse(b)) => {
                Matrix::Dense(b.tr_mul_dense(a.transpose()).transpose().to_owned())
            }
            (Matrix::Dense(a), Matrix::Dense(b)) => Matrix::Dense(a * b),
        }
    }

    /// `self * x` for a dense right-hand side.
    pub fn mul(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        match self {
            Matrix::Dense(m) => m * x,
            Matrix::Sparse(s) => s.mul_dense(x),
        }
    }

    pub fn mul_c(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        match self {
            Matrix::Dense(m) => to_complex(m.as_ref()) * x,
            Matrix::Sparse(s) => s.mul_dense_c(x),
        }
    }

    /// `selfᵀ * x`.
    pub fn tr_mul(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        match self {
            Matrix::Dense(m) => m.transpose() * x,
            Matrix::Sparse(s) => s.tr_mul_dense(x),
        }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Matrix::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (j, xj) in x.iter().enumerate() {
                        s += m[(i, j)] * xj;
                    }
                    *o = s;
                }
            }
            Matrix::Sparse(s) => s.mul_vec(x, out),
        }
    }

    pub fn norm_fro(&self) -> f64 {
        match self {
            Matrix::Dense(m) => m.norm_l2(),
            Matrix::Sparse(s) => s.values().iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut cols = vec![0.0f64; self.ncols()];
        for (_, j, v) in self.triplets() {
            cols[j] += v.abs();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// Spectral norm: exact for small dense, power iteration on `MᵀM` otherwise.
    pub fn norm_2(&self) -> f64 {
        if let Matrix::Dense(m) = self {
            if m.nrows().max(m.ncols()) <= 200 {
                return spectral_norm(m.as_ref());
            }
        }
        let n = self.ncols();
        if n == 0 || self.nrows() == 0 {
            return 0.0;
        }
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
        let mut est = 0.0;
        for _ in 0..60 {
            let nx = x.norm_l2();
            if nx == 0.0 {
                return 0.0;
            }
            for i in 0..n {
                x[(i, 0)] /= nx;
            }
            let y = self.mul(x.as_ref());
            let z = self.tr_mul(y.as_ref());
            let new = y.norm_l2();
            x = z;
            if (new - est).abs() <= 1e-6 * new {
                est = new;
                break;
            }
            est = new;
        }
        est
    }

    /// `‖M − Mᵀ‖_F`.
    pub fn asymmetry(&self) -> f64 {
        self.lin_comb(1.0, &self.transpose(), -1.0).norm_fro()
    }

    /// `‖M + Mᵀ‖_F`.
    pub fn non_skewness(&self) -> f64 {
        self.lin_comb(1.0, &self.transpose(), 1.0).norm_fro()
    }

    /// `½(M + Mᵀ)`.
    pub fn sym_part(&self) -> Self {
        self.lin_comb(0.5, &self.transpose(), 0.5)
    }

    /// `½(M − Mᵀ)`.
    pub fn skew_part(&self) -> Self {
        self.lin_comb(0.5, &self.transpose(), -0.5)
    }

    /// Whether the matrix is the identity.
    pub fn is_identity(&self) -> bool {
        if self.nrows() != self.ncols() {
            return false;
        }
        let t = self.triplets();
        t.len() == self.nrows() && t.iter().all(|&(i, j, v)| i == j && v == 1.0)
    }

    /// `Xᵀ M Y` for dense tall `X`, `Y`.
    pub fn congruence(&self, x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Mat<f64> {
        x.transpose() * self.mul(y)
    }
}

pub fn all_finite(m: MatRef<'_, f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

pub fn all_finite_c(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

pub fn to_complex(m: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

pub fn real_part(m: MatRef<'_, c64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)
}

pub fn imag_part(m: MatRef<'_, c64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].im)
}

pub fn conj(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn norm_fro_c(m: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn symmetrize(m: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub fn singular_values(m: MatRef<'_, f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s = m.singular_values().unwrap_or_else(|_| vec![f64::NAN; m.nrows().min(m.ncols())]);
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    s
}

pub fn singular_values_c(m: MatRef<'_, c64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s = m.singular_values().unwrap_or_else(|_| vec![f64::NAN; m.nrows().min(m.ncols())]);
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    s
}

pub fn spectral_norm(m: MatRef<'_, f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// 2-norm condition number; infinite for singular or empty input.
pub fn cond_2(m: MatRef<'_, f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn cond_2_c(m: MatRef<'_, c64>) -> f64 {
    let s = singular_values_c(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Eigenvalues of a dense real matrix.
pub fn eigenvalues(m: MatRef<'_, f64>) -> crate::Result<Vec<c64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.eigenvalues().map_err(|_| crate::Error::EigenNoConvergence)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(m: MatRef<'_, f64>) -> crate::Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest eigenvalue of the symmetric part.
pub fn min_sym_eigenvalue(m: MatRef<'_, f64>) -> crate::Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let s = symmetrize(m);
    let ev = s.self_adjoint_eigenvalues(Side::Lower).map_err(|_| crate::Error::EigenNoConvergence)?;
    Ok(ev.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Dense symmetric positive-definiteness test by Cholesky with a relative pivot floor.
pub fn dense_cholesky_ok(m: MatRef<'_, f64>, rel_pivot: f64) -> bool {
    let n = m.nrows();
    let floor = rel_pivot * spectral_norm(m).max(f64::MIN_POSITIVE);
    let mut l = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    true
}

/// Solves `M X = B` with partial pivoting, reporting numerical singularity.
pub fn dense_solve(m: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Option<Mat<f64>> {
    if m.nrows() == 0 {
        return Some(Mat::zeros(0, b.ncols()));
    }
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let mut umax = 0.0f64;
    let mut umin = f64::INFINITY;
    for i in 0..u.nrows() {
        umax = umax.max(u[(i, i)].abs());
        umin = umin.min(u[(i, i)].abs());
    }
    if !(umin > 1e-15 * umax) {
        return None;
    }
    let x = lu.solve(b);
    all_finite(x.as_ref()).then_some(x)
}

pub fn dense_solve_c(m: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Option<Mat<c64>> {
    if m.nrows() == 0 {
        return Some(Mat::zeros(0, b.ncols()));
    }
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let mut umax = 0.0f64;
    let mut umin = f64::INFINITY;
    for i in 0..u.nrows() {
        umax = umax.max(u[(i, i)].norm());
        umin = umin.min(u[(i, i)].norm());
    }
    if !(umin > 1e-15 * umax) {
        return None;
    }
    let x = lu.solve(b);
    all_finite_c(x.as_ref()).then_some(x)
}

pub fn dense_inverse(m: MatRef<'_, f64>) -> Option<Mat<f64>> {
    dense_solve(m, Mat::<f64>::identity(m.nrows(), m.nrows()).as_ref())
}

/// Orthonormal basis of the range with numerical rank determined at `rel_tol`.
///
/// Returns the basis and the numerical rank.
pub fn orthonormalize(m: MatRef<'_, f64>, rel_tol: f64) -> (Mat<f64>, usize) {
    let (n, k) = (m.nrows(), m.ncols());
    if k == 0 {
        return (Mat::zeros(n, 0), 0);
    }
    let qr = m.col_piv_qr();
    let r = qr.thin_R();
    let q = qr.compute_thin_Q();
    let r00 = r[(0, 0)].abs();
    let mut rank = 0;
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)].abs() > rel_tol * r00 && r00 > 0.0 {
            rank += 1;
        } else {
            break;
        }
    }
    (q, rank)
}

/// Relative Frobenius error `‖a − b‖/max(‖b‖, tiny)`.
pub fn rel_err(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut num = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let d = a[(i, j)] - b[(i, j)];
            num += d * d;
        }
    }
    num.sqrt() / b.norm_l2().max(f64::MIN_POSITIVE)
}

pub fn rel_err_c(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut num = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            num += (a[(i, j)] - b[(i, j)]).norm_sqr();
        }
    }
    num.sqrt() / norm_fro_c(b).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_and_dense_products_agree() {
        let t = [(0, 0, 1.0), (1, 0, 2.0), (2, 1, -3.0), (0, 2, 4.0), (1, 2, 0.5)];
        let a = SparseMat::from_triplets(3, 3, &t);
        let d = a.to_dense();
        let prod = a.matmul(&a).to_dense();
        assert!(rel_err(prod.as_ref(), (&d * &d).as_ref()) < 1e-15);
        let x = Mat::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        assert!(rel_err(a.mul_dense(x.as_ref()).as_ref(), (&d * &x).as_ref()) < 1e-15);
        assert!(rel_err(a.tr_mul_dense(x.as_ref()).as_ref(), (d.transpose() * &x).as_ref()) < 1e-15);
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let a = SparseMat::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (1, 1, -1.0)]);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn storage_follows_threshold() {
        assert!(!Matrix::identity(10).is_sparse());
        assert!(Matrix::identity(DENSE_BELOW).is_sparse());
        assert!(Matrix::Dense(Mat::identity(3, 3)).normalized() == Matrix::identity(3));
    }

    #[test]
    fn norm_2_power_iteration_matches_svd() {
        let t: Vec<_> = (0..600).flat_map(|i| {
            let mut v = vec![(i, i, 2.0 + (i % 7) as f64)];
            if i + 1 < 600 {
                v.push((i, i + 1, -1.0));
            }
            v
        }).collect();
        let a = Matrix::from_triplets(600, 600, &t);
        let exact = spectral_norm(a.to_dense().as_ref());
        assert!((a.norm_2() - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn cholesky_detects_indefinite() {
        let mut m = Mat::<f64>::identity(3, 3);
        assert!(dense_cholesky_ok(m.as_ref(), 1e-12));
        m[(2, 2)] = -0.1;
        assert!(!dense_cholesky_ok(m.as_ref(), 1e-12));
    }

    #[test]
    fn orthonormalize_reports_rank() {
        let m = Mat::from_fn(5, 3, |i, j| if j == 2 { (i as f64) + 1.0 } else { (i * (j + 1)) as f64 + 1.0 });
        let (_, rank) = orthonormalize(m.as_ref(), 1e-12);
        assert_eq!(rank, 2);
    }
}
