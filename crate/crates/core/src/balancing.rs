//! Gramians, the balancing transformation, balanced truncation and the effort-constraint method.

use alloc::format;
use alloc::vec::Vec;

use faer::prelude::*;
use faer::{Mat, MatRef, Side};
use num_traits::Float;

use crate::linalg::{self, DEFAULT_DENSE_CEILING, Matrix};
use crate::system::{PortHamiltonianSystem, StateSpaceSystem, StateTransform, build_ph, ph_to_state_space};
use crate::{Error, Result, Warning};

/// Hankel ratio below which the realization counts as non-minimal.
pub const MINIMALITY_TOL: f64 = 1e-14;
/// Hankel ratio `σ_r/σ_1` below which truncation warns.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// Solves `A P + P Aᵀ + M = 0` with the default dense ceiling.
pub fn solve_lyapunov(a: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    linalg::schur::lyapunov(a, m, DEFAULT_DENSE_CEILING)
}

pub fn solve_lyapunov_with(a: MatRef<'_, f64>, m: MatRef<'_, f64>, ceiling: usize) -> Result<Mat<f64>> {
    linalg::schur::lyapunov(a, m, ceiling)
}

/// `‖AP + PAᵀ + M‖_F / ‖M‖_F`.
pub fn lyapunov_residual(a: MatRef<'_, f64>, p: MatRef<'_, f64>, m: MatRef<'_, f64>) -> f64 {
    let ap = a * p;
    let res = &ap + ap.transpose() + m;
    res.norm_l2() / m.norm_l2().max(f64::MIN_POSITIVE)
}

/// Controllability and observability Gramians of a standard state-space system.
pub fn gramians(sys: &StateSpaceSystem, ceiling: usize) -> Result<(Mat<f64>, Mat<f64>)> {
    let sys = standard(sys)?;
    let a = sys.a().to_dense();
    let b = sys.b();
    let c = sys.c();
    let gc = linalg::schur::lyapunov(a.as_ref(), (b * b.transpose()).as_ref(), ceiling)?;
    let go = linalg::schur::lyapunov(a.transpose(), (c.transpose() * c).as_ref(), ceiling)?;
    Ok((gc, go))
}

fn standard(sys: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    match sys.e() {
        Some(e) if !e.is_identity() => sys.to_standard(),
        _ => Ok(sys.clone()),
    }
}

/// `L` with `G = L Lᵀ`, from the eigendecomposition with negative eigenvalues clipped.
fn psd_factor(g: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let n = g.nrows();
    let sym = linalg::symmetrize(g);
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenNoConvergence)?;
    let u = evd.U();
    let s = evd.S().column_vector();
    Ok(Mat::from_fn(n, n, |i, j| u[(i, j)] * s[j].max(0.0).sqrt()))
}

/// Balancing data in the convention `x_b = T_b x`.
#[derive(Clone, Debug)]
pub struct BalancingData {
    /// Hankel singular values, descending.
    pub hankel_values: Vec<f64>,
    /// Number of Hankel values above `MINIMALITY_TOL · σ_1`.
    pub rank: usize,
    pub warnings: Vec<Warning>,
    transform: Option<StateTransform>,
    // Square-root factors: T_b = Σ^{-1/2} Uᵀ L_oᵀ, T_b⁻¹ = L_c V Σ^{-1/2}.
    left: Mat<f64>,
    right: Mat<f64>,
}

impl BalancingData {
    /// Full balancing transformation; `None` when the realization is numerically non-minimal.
    pub fn transform(&self) -> Option<&StateTransform> {
        self.transform.as_ref()
    }

    /// Leading `k` rows of `T_b` and leading `k` columns of `T_b⁻¹`.
    pub fn leading(&self, k: usize) -> (Mat<f64>, Mat<f64>) {
        let k = k.min(self.rank);
        (self.left.as_ref().subrows(0, k).to_owned(), self.right.as_ref().subcols(0, k).to_owned())
    }
}

pub fn balancing_transformation(sys: &StateSpaceSystem) -> Result<BalancingData> {
    balancing_transformation_with(sys, DEFAULT_DENSE_CEILING)
}

/// Square-root balancing: factor both Gramians and take the SVD of `L_oᵀ L_c`.
pub fn balancing_transformation_with(sys: &StateSpaceSystem, ceiling: usize) -> Result<BalancingData> {
    let n = sys.n();
    let (gc, go) = gramians(sys, ceiling)?;
    let lc = psd_factor(gc.as_ref())?;
    let lo = psd_factor(go.as_ref())?;
    let cross = lo.transpose() * &lc;
    let svd = cross.svd().map_err(|_| Error::EigenNoConvergence)?;
    let sv = svd.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]));
    let hankel_values: Vec<f64> = order.iter().map(|&i| sv[i].max(0.0)).collect();
    let top = hankel_values.first().copied().unwrap_or(0.0);
    let rank = hankel_values.iter().take_while(|&&s| top > 0.0 && s >= MINIMALITY_TOL * top).count();
    let mut warnings = Vec::new();
    if rank < n {
        let ratio = if top > 0.0 { hankel_values[n - 1] / top } else { 0.0 };
        warnings.push(Warning::NearNonMinimal { ratio, rank });
    }
    let (u, v) = (svd.U(), svd.V());
    let uo = Mat::from_fn(n, rank, |i, k| u[(i, order[k])]);
    let vc = Mat::from_fn(n, rank, |i, k| v[(i, order[k])]);
    let mut left = uo.transpose() * lo.transpose();
    let mut right = &lc * &vc;
    for k in 0..rank {
        let w = hankel_values[k].sqrt().recip();
        for i in 0..n {
            left[(k, i)] *= w;
            right[(i, k)] *= w;
        }
    }
    let transform = if rank == n { Some(StateTransform::from_pair(left.clone(), right.clone())?) } else { None };
    Ok(BalancingData { hankel_values, rank, warnings, transform, left, right })
}

/// A reduced model with the Hankel values and warnings of the balancing step.
#[derive(Clone, Debug)]
pub struct BalancedReduction<S> {
    pub system: S,
    pub hankel_values: Vec<f64>,
    pub warnings: Vec<Warning>,
}

fn check_order(r: usize, n: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::BadParams(format!("reduction order must be in 1..={n}, got {r}")));
    }
    Ok(())
}

/// Keeps `min(r, rank)` states and appends the truncation guard warning.
fn truncation_order(data: &BalancingData, r: usize, warnings: &mut Vec<Warning>) -> usize {
    let top = data.hankel_values[0];
    let k = r.min(data.rank);
    let ratio = if top > 0.0 { data.hankel_values[r - 1] / top } else { 0.0 };
    if ratio < TRUNCATION_TOL && !warnings.iter().any(|w| matches!(w, Warning::NearNonMinimal { .. })) {
        warnings.push(Warning::NearNonMinimal { ratio, rank: data.rank });
    }
    k
}

pub fn balanced_truncation(sys: &StateSpaceSystem, r: usize) -> Result<StateSpaceSystem> {
    Ok(balanced_truncation_with(sys, r, DEFAULT_DENSE_CEILING)?.system)
}

/// Regular balanced truncation; the result is generally not port-Hamiltonian.
pub fn balanced_truncation_with(
    sys: &StateSpaceSystem,
    r: usize,
    ceiling: usize,
) -> Result<BalancedReduction<StateSpaceSystem>> {
    check_order(r, sys.n())?;
    let std_sys = standard(sys)?;
    let data = balancing_transformation_with(&std_sys, ceiling)?;
    let mut warnings = data.warnings.clone();
    let k = truncation_order(&data, r, &mut warnings);
    let (t1, ti1) = data.leading(k);
    let a = &t1 * std_sys.a().mul(ti1.as_ref());
    let b = &t1 * std_sys.b();
    let c = std_sys.c() * &ti1;
    let system = StateSpaceSystem::new(None, Matrix::Dense(a), b, c)?;
    Ok(BalancedReduction { system, hankel_values: data.hankel_values, warnings })
}

/// `Q₁₁ − Q₁₂ Q₂₂⁻¹ Q₂₁` for the leading `r × r` block.
pub fn schur_complement(q: MatRef<'_, f64>, r: usize) -> Result<Mat<f64>> {
    let n = q.nrows();
    if q.ncols() != n || r > n {
        return Err(Error::DimensionMismatch(format!("Schur complement of order {r} of a {n}x{} matrix", q.ncols())));
    }
    let q11 = q.submatrix(0, 0, r, r);
    if r == n {
        return Ok(q11.to_owned());
    }
    let q12 = q.submatrix(0, r, r, n - r);
    let q22 = linalg::symmetrize(q.submatrix(r, r, n - r, n - r));
    if !linalg::dense_cholesky_ok(q22.as_ref(), 1e-14) {
        return Err(Error::SingularSchurBlock);
    }
    let llt = q22.llt(Side::Lower).map_err(|_| Error::SingularSchurBlock)?;
    let x = llt.solve(q12.transpose());
    Ok(linalg::symmetrize((q11 - q12 * x).as_ref()))
}

pub fn effort_constraint_reduce(ph: &PortHamiltonianSystem, r: usize) -> Result<PortHamiltonianSystem> {
    Ok(effort_constraint_reduce_with(ph, r, DEFAULT_DENSE_CEILING)?.system)
}

/// Effort-constraint reduction of the balanced port-Hamiltonian realization.
///
/// The Schur complement of `Q_b` equals `(T₁ Q⁻¹ T₁ᵀ)⁻¹` with `T₁` the leading rows of
/// `T_b`, so the trailing, poorly scaled rows of `T_b` are never formed.
pub fn effort_constraint_reduce_with(
    ph: &PortHamiltonianSystem,
    r: usize,
    ceiling: usize,
) -> Result<BalancedReduction<PortHamiltonianSystem>> {
    let n = ph.n();
    check_order(r, n)?;
    if n > ceiling {
        return Err(Error::SizeLimitExceeded { n, limit: ceiling });
    }
    let data = balancing_transformation_with(&ph_to_state_space(ph), ceiling)?;
    let mut warnings = data.warnings.clone();
    let k = truncation_order(&data, r, &mut warnings);
    let (t1, _) = data.leading(k);
    let q = linalg::symmetrize(ph.q().to_dense().as_ref());
    let q_llt = q.llt(Side::Lower).map_err(|_| Error::Factorization("Q is not positive definite".into()))?;
    let m = linalg::symmetrize((&t1 * q_llt.solve(t1.transpose())).as_ref());
    if !linalg::dense_cholesky_ok(m.as_ref(), 1e-14) {
        return Err(Error::SingularSchurBlock);
    }
    let m_llt = m.llt(Side::Lower).map_err(|_| Error::SingularSchurBlock)?;
    let s_b = linalg::symmetrize(m_llt.solve(Mat::<f64>::identity(k, k)).as_ref());
    let jt = &t1 * ph.j().mul(t1.transpose());
    let j = Mat::from_fn(k, k, |a, b| 0.5 * (jt[(a, b)] - jt[(b, a)]));
    let rt = linalg::symmetrize((&t1 * ph.r().mul(t1.transpose())).as_ref());
    let b = &t1 * ph.b();
    let system = build_ph(Matrix::Dense(j), Matrix::Dense(rt), Matrix::Dense(s_b), b)?;
    Ok(BalancedReduction { system, hankel_values: data.hankel_values, warnings })
}
