//! Tangential bases, realification and Petrov-Galerkin projections.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::{Mat, MatRef, c64};
use num_traits::Float;

use crate::error::StructureKind;
use crate::linalg::{self, Matrix, ShiftedSolver, cond_2, dense_solve, orthonormalize, symmetrize, to_complex};
use crate::system::{
    InterpolationData, PortHamiltonianSystem, Slot, StateSpaceSystem, build_ph, ph_to_state_space,
};
use crate::{Error, Result, Warning};

/// Relative pivot below which a basis is rank deficient.
///
/// Clustered points give pivots near machine precision that still carry usable
/// directions, so only pivots at the level of exact degeneracy are rejected.
/// Exactly repeated columns are caught separately by [`repeated_column`].
pub const RANK_TOL: f64 = 1e-18;
/// Condition of `VᵀQV` above which a warning is attached.
pub const COND_WARN: f64 = 1e12;
/// Condition of `VᵀQV` above which reduction fails.
pub const COND_FAIL: f64 = 1e14;

/// Primitive complex basis `[(s_i E − A)⁻¹ B b_i, …]`, grouped by point.
#[derive(Clone, Debug)]
pub struct TangentialBasis {
    columns: Mat<c64>,
    data: InterpolationData,
    hermite_orders: Vec<usize>,
}

impl TangentialBasis {
    pub fn columns(&self) -> MatRef<'_, c64> {
        self.columns.as_ref()
    }

    pub fn data(&self) -> &InterpolationData {
        &self.data
    }

    pub fn hermite_orders(&self) -> &[usize] {
        &self.hermite_orders
    }

    /// First column index belonging to point `i`.
    fn offset(&self, i: usize) -> usize {
        self.hermite_orders[..i].iter().sum()
    }
}

/// Real orthonormal basis with the same range as a [`TangentialBasis`].
#[derive(Clone, Debug)]
pub struct RealBasis {
    pub columns: Mat<f64>,
    /// 2-norm condition of the realified, column-normalized primitive basis.
    pub conditioning: f64,
}

fn at_point(e: Error, i: usize) -> Error {
    match e {
        Error::SingularPencil { re, im, .. } => Error::SingularPencil { re, im, index: Some(i) },
        other => other,
    }
}

fn hermite_columns(
    sys: &StateSpaceSystem,
    solver: &ShiftedSolver,
    point: c64,
    direction: &[c64],
    order: usize,
    left: bool,
) -> Result<Mat<c64>> {
    let n = sys.n();
    if order == 0 {
        return Err(Error::BadParams("Hermite order must be at least 1".into()));
    }
    let (width, port) = if left { (sys.p(), sys.c().transpose()) } else { (sys.m(), sys.b()) };
    if direction.len() != width {
        return Err(Error::DimensionMismatch(format!("direction has {} entries, expected {width}", direction.len())));
    }
    let f = solver.factor(point)?;
    let bb = to_complex(port) * Mat::from_fn(width, 1, |i, _| direction[i]);
    let mut out = Mat::<c64>::zeros(n, order);
    let mut w = if left { f.solve_transpose(bb.as_ref())? } else { f.solve(bb.as_ref())? };
    out.col_mut(0).copy_from(w.col(0));
    for k in 1..order {
        w = f.solve(sys.e_mul_c(w.as_ref()).as_ref())?;
        out.col_mut(k).copy_from(w.col(0));
    }
    Ok(out)
}

/// Columns `((ŝE − A)⁻¹E)^{k−1} (ŝE − A)⁻¹ B b̂` for `k = 1..=order`.
pub fn hermite_extend(sys: &StateSpaceSystem, point: c64, direction: &[c64], order: usize) -> Result<Mat<c64>> {
    hermite_columns(sys, &sys.solver()?, point, direction, order, false)
}

/// Tangential basis with one column per interpolation point.
pub fn tangential_basis(sys: &StateSpaceSystem, data: &InterpolationData) -> Result<TangentialBasis> {
    tangential_basis_with(sys, &sys.solver()?, data)
}

/// [`tangential_basis`] reusing an existing solver for the pencil of `sys`.
pub fn tangential_basis_with(
    sys: &StateSpaceSystem,
    solver: &ShiftedSolver,
    data: &InterpolationData,
) -> Result<TangentialBasis> {
    build_basis(sys, solver, data, &vec![1; data.len()], false)
}

/// Left basis `[(s_i E − A)⁻ᵀ Cᵀ c_i, …]`; `data` carries the left directions.
pub fn left_tangential_basis_with(
    sys: &StateSpaceSystem,
    solver: &ShiftedSolver,
    data: &InterpolationData,
) -> Result<TangentialBasis> {
    build_basis(sys, solver, data, &vec![1; data.len()], true)
}

/// Tangential basis with `orders[i]` Hermite columns at point `i`.
///
/// Conjugate partners must carry the same order; their columns are conjugated
/// rather than solved again.
pub fn hermite_basis(sys: &StateSpaceSystem, data: &InterpolationData, orders: &[usize]) -> Result<TangentialBasis> {
    build_basis(sys, &sys.solver()?, data, orders, false)
}

fn build_basis(
    sys: &StateSpaceSystem,
    solver: &ShiftedSolver,
    data: &InterpolationData,
    orders: &[usize],
    left: bool,
) -> Result<TangentialBasis> {
    if orders.len() != data.len() {
        return Err(Error::DimensionMismatch(format!("{} orders for {} points", orders.len(), data.len())));
    }
    let width = if left { sys.p() } else { sys.m() };
    if data.directions().nrows() != width {
        return Err(Error::DimensionMismatch(format!(
            "directions have {} rows, expected {width}",
            data.directions().nrows()
        )));
    }
    let total: usize = orders.iter().sum();
    let mut basis = TangentialBasis {
        columns: Mat::zeros(sys.n(), total),
        data: data.clone(),
        hermite_orders: orders.to_vec(),
    };
    for slot in data.slots() {
        match slot {
            Slot::Real(i) => {
                let cols = hermite_columns(sys, solver, data.points()[i], &data.direction(i), orders[i], left)
                    .map_err(|e| at_point(e, i))?;
                let off = basis.offset(i);
                for k in 0..orders[i] {
                    for a in 0..sys.n() {
                        basis.columns[(a, off + k)] = c64::new(cols[(a, k)].re, 0.0);
                    }
                }
            }
            Slot::Pair(u, l) => {
                if orders[u] != orders[l] {
                    return Err(Error::NotConjugateClosed(format!(
                        "conjugate points {u} and {l} have Hermite orders {} and {}",
                        orders[u], orders[l]
                    )));
                }
                let cols = hermite_columns(sys, solver, data.points()[u], &data.direction(u), orders[u], left)
                    .map_err(|e| at_point(e, u))?;
                let (ou, ol) = (basis.offset(u), basis.offset(l));
                for k in 0..orders[u] {
                    for a in 0..sys.n() {
                        basis.columns[(a, ou + k)] = cols[(a, k)];
                        basis.columns[(a, ol + k)] = cols[(a, k)].conj();
                    }
                }
            }
        }
    }
    let raw = real_columns(&basis)?;
    let (_, rank) = orthonormalize(raw.as_ref(), RANK_TOL);
    let rank = if repeated_column(raw.as_ref()) { rank.min(total - 1) } else { rank };
    if rank < total {
        return Err(Error::RankDeficient { rank, expected: total });
    }
    Ok(basis)
}

/// True when some normalized column equals an earlier one up to sign.
///
/// Roundoff leaves such a column with a pivot of a few ulps, which the pivot test
/// cannot tell apart from a tightly clustered but valid basis.
pub fn repeated_column(m: MatRef<'_, f64>) -> bool {
    let same = |a: usize, b: usize, sign: f64| (0..m.nrows()).all(|i| m[(i, a)] == sign * m[(i, b)]);
    (1..m.ncols()).any(|j| (0..j).any(|k| same(j, k, 1.0) || same(j, k, -1.0)))
}

/// Pair-split, column-normalized real counterpart of the primitive basis.
fn real_columns(basis: &TangentialBasis) -> Result<Mat<f64>> {
    let n = basis.columns.nrows();
    let total = basis.columns.ncols();
    let mut out = Mat::<f64>::zeros(n, total);
    let mut next = 0;
    let s2 = 2.0f64.sqrt();
    let mut push = |out: &mut Mat<f64>, f: &dyn Fn(usize) -> f64| {
        for a in 0..n {
            out[(a, next)] = f(a);
        }
        next += 1;
    };
    for slot in basis.data.slots() {
        match slot {
            Slot::Real(i) => {
                let off = basis.offset(i);
                for k in 0..basis.hermite_orders[i] {
                    push(&mut out, &|a| basis.columns[(a, off + k)].re);
                }
            }
            Slot::Pair(u, l) => {
                if basis.hermite_orders[u] != basis.hermite_orders[l] {
                    return Err(Error::NotConjugateClosed(format!("points {u} and {l} differ in Hermite order")));
                }
                let off = basis.offset(u);
                for k in 0..basis.hermite_orders[u] {
                    push(&mut out, &|a| s2 * basis.columns[(a, off + k)].re);
                    push(&mut out, &|a| s2 * basis.columns[(a, off + k)].im);
                }
            }
        }
    }
    for j in 0..total {
        let nrm = out.col(j).norm_l2();
        if nrm > 0.0 {
            for a in 0..n {
                out[(a, j)] /= nrm;
            }
        }
    }
    Ok(out)
}

/// Replaces conjugate column pairs by scaled real and imaginary parts and orthonormalizes.
pub fn realify(basis: &TangentialBasis) -> Result<RealBasis> {
    let raw = real_columns(basis)?;
    let total = raw.ncols();
    let (q, rank) = orthonormalize(raw.as_ref(), RANK_TOL);
    let rank = if repeated_column(raw.as_ref()) { rank.min(total - 1) } else { rank };
    if rank < total {
        return Err(Error::RankDeficient { rank, expected: total });
    }
    Ok(RealBasis { columns: q, conditioning: cond_2(raw.as_ref()) })
}

/// `(WᵀEV, WᵀAV, WᵀB, CV)`.
pub fn petrov_galerkin_reduce(sys: &StateSpaceSystem, v: MatRef<'_, f64>, w: MatRef<'_, f64>) -> Result<StateSpaceSystem> {
    let n = sys.n();
    if v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() || v.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "V is {}x{}, W is {}x{}, n = {n}",
            v.nrows(),
            v.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let er = match sys.e() {
        Some(e) => w.transpose() * e.mul(v),
        None => w.transpose() * v,
    };
    let ar = w.transpose() * sys.a().mul(v);
    let br = w.transpose() * sys.b();
    let cr = sys.c() * v;
    if dense_solve(er.as_ref(), Mat::<f64>::identity(v.ncols(), v.ncols()).as_ref()).is_none() {
        return Err(Error::SingularReducedPencil);
    }
    StateSpaceSystem::new(Some(Matrix::Dense(er)), Matrix::Dense(ar), br, cr).map_err(|e| match e {
        Error::SingularDescriptor => Error::SingularReducedPencil,
        other => other,
    })
}

/// Structure-preserving projection together with its intermediate quantities.
#[derive(Clone, Debug)]
pub struct PhReduction {
    pub system: PortHamiltonianSystem,
    /// Real basis `V̂`.
    pub basis: Mat<f64>,
    /// `Ŵ = QV̂ (V̂ᵀQV̂)⁻¹`.
    pub w: Mat<f64>,
    pub q_r_condition: f64,
    /// `‖J_r + J_rᵀ‖_F / max(1, ‖J_r‖_F)` before projection onto the skew part.
    pub raw_skewness: f64,
    /// `‖R_r − R_rᵀ‖_F / max(1, ‖R_r‖_F)` before symmetrization.
    pub raw_asymmetry: f64,
    pub warnings: Vec<Warning>,
}

fn rel_nonsym(m: MatRef<'_, f64>, sign: f64) -> f64 {
    let d = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - sign * m[(j, i)]);
    d.norm_l2() / m.norm_l2().max(1.0)
}

/// `J_r = ŴᵀJŴ`, `R_r = ŴᵀRŴ`, `Q_r = V̂ᵀQV̂`, `B_r = ŴᵀB` for a given real basis.
pub fn ph_reduce_with_basis(ph: &PortHamiltonianSystem, v: MatRef<'_, f64>) -> Result<PhReduction> {
    let n = ph.n();
    if v.nrows() != n || v.ncols() == 0 || v.ncols() > n {
        return Err(Error::DimensionMismatch(format!("basis is {}x{}, n = {n}", v.nrows(), v.ncols())));
    }
    let qv = ph.q().mul(v);
    let q_r = symmetrize((v.transpose() * &qv).as_ref());
    let cond = cond_2(q_r.as_ref());
    if !(cond <= COND_FAIL) {
        return Err(Error::StructureViolation {
            kind: StructureKind::Conditioning,
            detail: format!("cond(VᵀQV) = {cond:e} exceeds {COND_FAIL:e}"),
        });
    }
    let mut warnings = Vec::new();
    if cond > COND_WARN {
        warnings.push(Warning::IllConditionedReducedEnergy { condition: cond });
    }
    let wt = dense_solve(q_r.as_ref(), qv.transpose()).ok_or_else(|| Error::StructureViolation {
        kind: StructureKind::Conditioning,
        detail: "VᵀQV could not be factored".into(),
    })?;
    let w = wt.transpose().to_owned();
    let jw = ph.j().mul(w.as_ref());
    let jr_raw = &wt * &jw;
    let raw_skewness = rel_nonsym(jr_raw.as_ref(), -1.0);
    let jr = Mat::from_fn(jr_raw.nrows(), jr_raw.ncols(), |i, j| 0.5 * (jr_raw[(i, j)] - jr_raw[(j, i)]));
    let rr_raw = &wt * ph.r().mul(w.as_ref());
    let raw_asymmetry = rel_nonsym(rr_raw.as_ref(), 1.0);
    let rr = symmetrize(rr_raw.as_ref());
    let br = &wt * ph.b();
    let system = build_ph(Matrix::Dense(jr), Matrix::Dense(rr), Matrix::Dense(q_r), br)?;
    Ok(PhReduction { system, basis: v.to_owned(), w, q_r_condition: cond, raw_skewness, raw_asymmetry, warnings })
}

/// Structure-preserving interpolatory reduction, returning intermediates.
pub fn ph_structure_reduce_detailed(ph: &PortHamiltonianSystem, data: &InterpolationData) -> Result<PhReduction> {
    let ss = ph_to_state_space(ph);
    let basis = realify(&tangential_basis(&ss, data)?)?;
    ph_reduce_with_basis(ph, basis.columns.as_ref())
}

/// Structure-preserving interpolatory reduction.
pub fn ph_structure_reduce(ph: &PortHamiltonianSystem, data: &InterpolationData) -> Result<PortHamiltonianSystem> {
    Ok(ph_structure_reduce_detailed(ph, data)?.system)
}

/// `‖G(s_i)b_i − G_r(s_i)b_i‖ / max(ε, ‖G(s_i)b_i‖)` per point.
pub fn interpolation_residuals(
    full: &StateSpaceSystem,
    reduced: &StateSpaceSystem,
    data: &InterpolationData,
) -> Result<Vec<f64>> {
    if full.m() != reduced.m() || full.p() != reduced.p() || data.directions().nrows() != full.m() {
        return Err(Error::DimensionMismatch("systems and directions disagree in m or p".into()));
    }
    let fs = full.solver()?;
    let rs = reduced.solver()?;
    let mut out = Vec::with_capacity(data.len());
    for (i, &s) in data.points().iter().enumerate() {
        let b = Mat::from_fn(full.m(), 1, |a, _| data.directions()[(a, i)]);
        let g = apply(full, &fs, s, b.as_ref()).map_err(|e| at_point(e, i))?;
        let gr = apply(reduced, &rs, s, b.as_ref()).map_err(|e| at_point(e, i))?;
        let diff = &g - &gr;
        out.push(linalg::norm_fro_c(diff.as_ref()) / linalg::norm_fro_c(g.as_ref()).max(f64::EPSILON));
    }
    Ok(out)
}

/// `C (sE − A)⁻¹ B x`.
pub(crate) fn apply(sys: &StateSpaceSystem, solver: &ShiftedSolver, s: c64, x: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let rhs = to_complex(sys.b()) * x;
    let y = solver.factor(s)?.solve(rhs.as_ref())?;
    Ok(to_complex(sys.c()) * y)
}
