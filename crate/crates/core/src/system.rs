//! System realizations, structural validation and transfer-function evaluation.

use alloc::format;
use alloc::vec::Vec;

use faer::{Mat, MatRef, c64};
use num_traits::Float;

use crate::error::StructureKind;
use crate::linalg::{
    self, Matrix, ShiftedSolver, all_finite, all_finite_c, dense_cholesky_ok, envelope_cholesky_ok, to_complex,
};
use crate::{Error, Result};

/// Relative tolerance for skewness and symmetry of J, R and Q.
pub const TAU_SKEW: f64 = 1e-12;
/// Relative floor for the smallest eigenvalue of R.
pub const TAU_PSD: f64 = 1e-10;
/// Relative pivot threshold for the Cholesky test of Q.
pub const TAU_PD: f64 = 1e-12;

/// `E ẋ = A x + B u`, `y = C x`. `E = None` stands for the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceSystem {
    e: Option<Matrix>,
    a: Matrix,
    b: Mat<f64>,
    c: Mat<f64>,
}

impl StateSpaceSystem {
    pub fn new(e: Option<Matrix>, a: Matrix, b: Mat<f64>, c: Mat<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, B is {}x{}, C is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::DimensionMismatch("n, m and p must be positive".into()));
        }
        if !a.all_finite() {
            return Err(Error::NonFinite("A"));
        }
        if !all_finite(b.as_ref()) {
            return Err(Error::NonFinite("B"));
        }
        if !all_finite(c.as_ref()) {
            return Err(Error::NonFinite("C"));
        }
        let e = match e {
            Some(e) if e.is_identity() => None,
            other => other,
        };
        if let Some(e) = &e {
            if e.nrows() != n || e.ncols() != n {
                return Err(Error::DimensionMismatch(format!("E is {}x{}, expected {n}x{n}", e.nrows(), e.ncols())));
            }
            if !e.all_finite() {
                return Err(Error::NonFinite("E"));
            }
            check_nonsingular_descriptor(e)?;
        }
        Ok(Self { e, a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn e(&self) -> Option<&Matrix> {
        self.e.as_ref()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> MatRef<'_, f64> {
        self.b.as_ref()
    }

    pub fn c(&self) -> MatRef<'_, f64> {
        self.c.as_ref()
    }

    pub fn e_dense(&self) -> Mat<f64> {
        match &self.e {
            Some(e) => e.to_dense(),
            None => Mat::identity(self.n(), self.n()),
        }
    }

    pub fn e_matrix(&self) -> Matrix {
        self.e.clone().unwrap_or_else(|| Matrix::identity(self.n()))
    }

    /// `E x` for a dense block.
    pub fn e_mul_c(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        match &self.e {
            Some(e) => e.mul_c(x),
            None => x.to_owned(),
        }
    }

    pub fn solver(&self) -> Result<ShiftedSolver> {
        ShiftedSolver::new(self.e.as_ref(), &self.a)
    }

    /// Equivalent realization with `E = I` (dense `E⁻¹A`, `E⁻¹B`).
    pub fn to_standard(&self) -> Result<StateSpaceSystem> {
        let Some(e) = &self.e else {
            return Ok(self.clone());
        };
        let ed = e.to_dense();
        let a = linalg::dense_solve(ed.as_ref(), self.a.to_dense().as_ref()).ok_or(Error::SingularDescriptor)?;
        let b = linalg::dense_solve(ed.as_ref(), self.b.as_ref()).ok_or(Error::SingularDescriptor)?;
        StateSpaceSystem::new(None, Matrix::Dense(a).normalized(), b, self.c.clone())
    }

    /// Generalized eigenvalues of `(A, E)` (dense).
    pub fn poles(&self) -> Result<Vec<c64>> {
        let std = self.to_standard()?;
        linalg::eigenvalues(std.a.to_dense().as_ref())
    }

    /// Largest real part of the poles.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self.poles()?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn evaluator(&self) -> Result<TransferEvaluator<'_>> {
        Ok(TransferEvaluator { sys: self, solver: self.solver()? })
    }

    /// Same system with `B` and `C` replaced.
    pub fn with_io(&self, b: Mat<f64>, c: Mat<f64>) -> Result<StateSpaceSystem> {
        StateSpaceSystem::new(self.e.clone(), self.a.clone(), b, c)
    }
}

fn check_nonsingular_descriptor(e: &Matrix) -> Result<()> {
    let n = e.nrows();
    let zero = Matrix::zeros(n, n);
    let solver = ShiftedSolver::new(Some(e), &zero)?;
    let f = solver.factor(c64::new(1.0, 0.0)).map_err(|_| Error::SingularDescriptor)?;
    let ones = Mat::<c64>::from_fn(n, 1, |i, _| c64::new(1.0 + (i % 7) as f64 * 0.1, 0.0));
    f.solve(ones.as_ref()).map_err(|_| Error::SingularDescriptor)?;
    Ok(())
}

/// Reusable transfer-function evaluator holding the pencil's symbolic analysis.
pub struct TransferEvaluator<'a> {
    sys: &'a StateSpaceSystem,
    solver: ShiftedSolver,
}

impl TransferEvaluator<'_> {
    /// `G(s) = C (sE − A)⁻¹ B`.
    pub fn eval(&self, s: c64) -> Result<Mat<c64>> {
        let x = self.solver.solve_real_rhs(s, self.sys.b.as_ref())?;
        Ok(to_complex(self.sys.c.as_ref()) * x)
    }

    /// `G'(s) = −C (sE − A)⁻¹ E (sE − A)⁻¹ B`.
    pub fn derivative(&self, s: c64) -> Result<Mat<c64>> {
        let f = self.solver.factor(s)?;
        let x = f.solve(to_complex(self.sys.b.as_ref()).as_ref())?;
        let y = f.solve(self.sys.e_mul_c(x.as_ref()).as_ref())?;
        let mut g = to_complex(self.sys.c.as_ref()) * y;
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                g[(i, j)] = -g[(i, j)];
            }
        }
        Ok(g)
    }
}

/// `C (sE − A)⁻¹ B` by one factorization and `m` solves.
pub fn eval_transfer(sys: &StateSpaceSystem, s: c64) -> Result<Mat<c64>> {
    sys.evaluator()?.eval(s)
}

/// `ẋ = (J − R) Q x + B u`, `y = Bᵀ Q x`.
#[derive(Clone, Debug, PartialEq)]
pub struct PortHamiltonianSystem {
    j: Matrix,
    r: Matrix,
    q: Matrix,
    b: Mat<f64>,
}

fn violation(kind: StructureKind, detail: alloc::string::String) -> Error {
    Error::StructureViolation { kind, detail }
}

/// Validates and assembles a port-Hamiltonian system.
///
/// `J` is projected onto its skew part and `R`, `Q` onto their symmetric parts
/// when the deviation is within [`TAU_SKEW`]; larger deviations are rejected.
pub fn build_ph(j: Matrix, r: Matrix, q: Matrix, b: Mat<f64>) -> Result<PortHamiltonianSystem> {
    let n = j.nrows();
    for (name, m) in [("J", &j), ("R", &r), ("Q", &q)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(violation(
                StructureKind::Dimension,
                format!("{name} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols()),
            ));
        }
    }
    if b.nrows() != n || b.ncols() == 0 || n == 0 {
        return Err(violation(StructureKind::Dimension, format!("B is {}x{}, n = {n}", b.nrows(), b.ncols())));
    }
    for (name, m) in [("J", &j), ("R", &r), ("Q", &q)] {
        if !m.all_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    if !all_finite(b.as_ref()) {
        return Err(Error::NonFinite("B"));
    }

    let skew = j.non_skewness() / j.norm_fro().max(1.0);
    if skew > TAU_SKEW {
        return Err(violation(StructureKind::Skewness, format!("‖J + Jᵀ‖/max(1,‖J‖) = {skew:e}")));
    }
    let j = if skew > 0.0 { j.skew_part() } else { j };

    let asym_r = r.asymmetry() / r.norm_fro().max(1.0);
    if asym_r > TAU_SKEW {
        return Err(violation(StructureKind::Symmetry, format!("‖R − Rᵀ‖/max(1,‖R‖) = {asym_r:e}")));
    }
    let r = if asym_r > 0.0 { r.sym_part() } else { r };
    check_psd(&r)?;

    let asym_q = q.asymmetry() / q.norm_fro().max(1.0);
    if asym_q > TAU_SKEW {
        return Err(violation(StructureKind::Symmetry, format!("‖Q − Qᵀ‖/max(1,‖Q‖) = {asym_q:e}")));
    }
    let q = if asym_q > 0.0 { q.sym_part() } else { q };
    check_pd(&q)?;

    Ok(PortHamiltonianSystem { j, r, q, b })
}

fn check_psd(r: &Matrix) -> Result<()> {
    let scale = r.norm_2().max(1.0);
    match r {
        Matrix::Dense(d) => {
            let lmin = linalg::min_sym_eigenvalue(d.as_ref())?;
            if lmin < -TAU_PSD * scale {
                return Err(violation(StructureKind::PositiveSemidefinite, format!("λ_min(R) = {lmin:e}")));
            }
        }
        Matrix::Sparse(s) => {
            if !envelope_cholesky_ok(s, TAU_PSD * scale, 0.0) {
                return Err(violation(
                    StructureKind::PositiveSemidefinite,
                    format!("R + {:e}·I is not positive definite", TAU_PSD * scale),
                ));
            }
        }
    }
    Ok(())
}

fn check_pd(q: &Matrix) -> Result<()> {
    let ok = match q {
        Matrix::Dense(d) => dense_cholesky_ok(d.as_ref(), TAU_PD),
        Matrix::Sparse(s) => envelope_cholesky_ok(s, 0.0, TAU_PD * q.norm_2()),
    };
    if ok {
        Ok(())
    } else {
        Err(violation(StructureKind::PositiveDefinite, "Cholesky pivot below 1e-12·‖Q‖₂".into()))
    }
}

/// Measured structural residuals of a port-Hamiltonian realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureReport {
    /// `‖J + Jᵀ‖_F / max(1, ‖J‖_F)`.
    pub skewness: f64,
    /// `λ_min(sym R) / max(1, ‖R‖₂)`.
    pub r_min_eig: f64,
    /// `λ_min(Q) / ‖Q‖₂`.
    pub q_min_eig: f64,
    /// Largest real part of the eigenvalues of `(J − R)Q`.
    pub spectral_abscissa: f64,
}

impl StructureReport {
    /// Dense measurement; intended for reduced or moderate-size systems.
    pub fn measure(j: MatRef<'_, f64>, r: MatRef<'_, f64>, q: MatRef<'_, f64>) -> Result<Self> {
        let mut skew = 0.0;
        for a in 0..j.nrows() {
            for b in 0..j.ncols() {
                let v = j[(a, b)] + j[(b, a)];
                skew += v * v;
            }
        }
        let skewness = skew.sqrt() / j.norm_l2().max(1.0);
        let r_min_eig = linalg::min_sym_eigenvalue(r)? / linalg::spectral_norm(r).max(1.0);
        let q_min_eig = linalg::min_sym_eigenvalue(q)? / linalg::spectral_norm(q).max(f64::MIN_POSITIVE);
        let a = (j - r) * q;
        let spectral_abscissa = linalg::spectral_abscissa(a.as_ref())?;
        Ok(Self { skewness, r_min_eig, q_min_eig, spectral_abscissa })
    }

    /// Whether all port-Hamiltonian invariants hold and the system is asymptotically stable.
    pub fn passes(&self) -> bool {
        self.skewness <= TAU_SKEW && self.r_min_eig >= -TAU_PSD && self.q_min_eig > 0.0 && self.spectral_abscissa < 0.0
    }
}

impl PortHamiltonianSystem {
    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn j(&self) -> &Matrix {
        &self.j
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn b(&self) -> MatRef<'_, f64> {
        self.b.as_ref()
    }

    /// `(J − R) Q`.
    pub fn a(&self) -> Matrix {
        self.j.lin_comb(1.0, &self.r, -1.0).matmul(&self.q).normalized()
    }

    /// `C = Bᵀ Q`.
    pub fn c(&self) -> Mat<f64> {
        self.q.tr_mul(self.b.as_ref()).transpose().to_owned()
    }

    pub fn structure_report(&self) -> Result<StructureReport> {
        StructureReport::measure(self.j.to_dense().as_ref(), self.r.to_dense().as_ref(), self.q.to_dense().as_ref())
    }

    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        let mut qx = alloc::vec![0.0; x.len()];
        self.q.mul_vec(x, &mut qx);
        0.5 * x.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// `E = I`, `A = (J − R)Q`, `C = BᵀQ`.
pub fn ph_to_state_space(ph: &PortHamiltonianSystem) -> StateSpaceSystem {
    StateSpaceSystem { e: None, a: ph.a(), b: ph.b.clone(), c: ph.c() }
}

/// Co-energy realization: `A = Q(J − R)`, `B = QB`, `C = Bᵀ`, state `e = Qx`.
pub fn to_coenergy(ph: &PortHamiltonianSystem) -> StateSpaceSystem {
    let a = ph.q.matmul(&ph.j.lin_comb(1.0, &ph.r, -1.0)).normalized();
    let b = ph.q.mul(ph.b.as_ref());
    let c = ph.b.transpose().to_owned();
    StateSpaceSystem { e: None, a, b, c }
}

/// Nonsingular state-space transformation `x̃ = T x`.
#[derive(Clone, Debug)]
pub struct StateTransform {
    t: Mat<f64>,
    inv: Mat<f64>,
}

impl StateTransform {
    pub fn new(t: Mat<f64>) -> Result<Self> {
        if t.nrows() != t.ncols() {
            return Err(Error::DimensionMismatch(format!("T is {}x{}", t.nrows(), t.ncols())));
        }
        if !all_finite(t.as_ref()) {
            return Err(Error::NonFinite("T"));
        }
        let inv = linalg::dense_inverse(t.as_ref()).ok_or(Error::SingularTransform)?;
        Ok(Self { t, inv })
    }

    /// Builds from a matrix and a known inverse (not re-verified beyond shapes).
    pub fn from_pair(t: Mat<f64>, inv: Mat<f64>) -> Result<Self> {
        if t.nrows() != t.ncols() || inv.nrows() != t.nrows() || inv.ncols() != t.ncols() {
            return Err(Error::DimensionMismatch("transform pair shapes differ".into()));
        }
        if !all_finite(t.as_ref()) || !all_finite(inv.as_ref()) {
            return Err(Error::NonFinite("T"));
        }
        Ok(Self { t, inv })
    }

    pub fn t(&self) -> MatRef<'_, f64> {
        self.t.as_ref()
    }

    pub fn inverse(&self) -> MatRef<'_, f64> {
        self.inv.as_ref()
    }
}

/// `J̃ = TJTᵀ`, `R̃ = TRTᵀ`, `Q̃ = T⁻ᵀQT⁻¹`, `B̃ = TB`.
pub fn apply_state_transform(ph: &PortHamiltonianSystem, t: &StateTransform) -> Result<PortHamiltonianSystem> {
    let n = ph.n();
    if t.t.nrows() != n {
        return Err(Error::DimensionMismatch(format!("T is {}x{}, system has n = {n}", t.t.nrows(), t.t.ncols())));
    }
    let tt = t.t.transpose();
    let jt = &t.t * ph.j.mul(tt);
    let rt = &t.t * ph.r.mul(tt);
    let qt = t.inv.transpose() * ph.q.mul(t.inv.as_ref());
    let j = Mat::from_fn(n, n, |a, b| 0.5 * (jt[(a, b)] - jt[(b, a)]));
    let r = linalg::symmetrize(rt.as_ref());
    let q = linalg::symmetrize(qt.as_ref());
    let b = &t.t * &ph.b;
    build_ph(Matrix::Dense(j).normalized(), Matrix::Dense(r).normalized(), Matrix::Dense(q).normalized(), b)
}

/// Instantaneous energy bookkeeping at a state/input pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerBalance {
    /// `H = ½ xᵀQx`.
    pub hamiltonian: f64,
    /// `uᵀy` with `y = BᵀQx`.
    pub supplied: f64,
    /// `xᵀQRQx`.
    pub dissipated: f64,
}

impl PowerBalance {
    /// `dH/dt = supplied − dissipated`.
    pub fn rate(&self) -> f64 {
        self.supplied - self.dissipated
    }
}

pub fn power_balance(ph: &PortHamiltonianSystem, x: &[f64], u: &[f64]) -> PowerBalance {
    let n = ph.n();
    assert_eq!(x.len(), n);
    assert_eq!(u.len(), ph.m());
    let mut qx = alloc::vec![0.0; n];
    ph.q.mul_vec(x, &mut qx);
    let hamiltonian = 0.5 * x.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>();
    let mut supplied = 0.0;
    for (k, uk) in u.iter().enumerate() {
        let yk: f64 = (0..n).map(|i| ph.b[(i, k)] * qx[i]).sum();
        supplied += uk * yk;
    }
    let mut rqx = alloc::vec![0.0; n];
    ph.r.mul_vec(&qx, &mut rqx);
    let dissipated = qx.iter().zip(&rqx).map(|(a, b)| a * b).sum::<f64>();
    PowerBalance { hamiltonian, supplied, dissipated }
}

/// Interpolation points with unit right tangent directions, closed under conjugation.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationData {
    points: Vec<c64>,
    directions: Mat<c64>,
}

/// Conjugation structure of an interpolation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Real(usize),
    /// `(upper, lower)` where the first index has positive imaginary part.
    Pair(usize, usize),
}

/// Phase of the first component that is not negligible against the largest one.
fn unit_phase_of_leading(v: &[c64]) -> c64 {
    let big = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match v.iter().find(|z| z.norm() >= 1e-8 * big && big > 0.0) {
        Some(z) => *z / z.norm(),
        None => c64::new(1.0, 0.0),
    }
}

impl InterpolationData {
    /// Validates and canonicalizes. Directions are normalized to unit length; each
    /// direction is stored up to a unit complex factor, chosen so that its first
    /// significant component is positive real. Directions at real points are then
    /// real, and conjugate partners are stored as exact conjugates.
    pub fn new(points: Vec<c64>, directions: Mat<c64>) -> Result<Self> {
        let r = points.len();
        if directions.ncols() != r || r == 0 || directions.nrows() == 0 {
            return Err(Error::InvalidInterpolationData(format!(
                "{r} points but directions are {}x{}",
                directions.nrows(),
                directions.ncols()
            )));
        }
        if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || !all_finite_c(directions.as_ref()) {
            return Err(Error::NonFinite("interpolation data"));
        }
        let m = directions.nrows();
        let scale = points.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
        for i in 0..r {
            for k in i + 1..r {
                if (points[i] - points[k]).norm() <= tol {
                    return Err(Error::InvalidInterpolationData(format!(
                        "points {i} and {k} coincide within 1e-12 relative"
                    )));
                }
            }
        }
        let mut points = points;
        let mut dirs = directions;
        for k in 0..r {
            let nrm = (0..m).map(|i| dirs[(i, k)].norm_sqr()).sum::<f64>().sqrt();
            if nrm == 0.0 {
                return Err(Error::InvalidInterpolationData(format!("direction {k} is zero")));
            }
            for i in 0..m {
                dirs[(i, k)] /= nrm;
            }
        }
        let mut done = alloc::vec![false; r];
        for i in 0..r {
            if done[i] {
                continue;
            }
            let s = points[i];
            let col: Vec<c64> = (0..m).map(|a| dirs[(a, i)]).collect();
            if s.im.abs() <= tol {
                let ph = unit_phase_of_leading(&col).conj();
                let mut imag = 0.0;
                for a in 0..m {
                    let z = col[a] * ph;
                    imag = imag.max(z.im.abs());
                    dirs[(a, i)] = c64::new(z.re, 0.0);
                }
                if imag > 1e-10 {
                    return Err(Error::NotConjugateClosed(format!(
                        "direction at real point {i} is not a multiple of a real vector"
                    )));
                }
                points[i] = c64::new(s.re, 0.0);
                done[i] = true;
                continue;
            }
            let target = s.conj();
            let partner = (0..r).find(|&k| k != i && !done[k] && (points[k] - target).norm() <= tol);
            let Some(k) = partner else {
                return Err(Error::NotConjugateClosed(format!("point {i} = {s} has no conjugate partner")));
            };
            let other: Vec<c64> = (0..m).map(|a| dirs[(a, k)]).collect();
            // other ≈ e^{iθ} conj(col)
            let inner: c64 = col.iter().zip(&other).map(|(x, y)| *x * *y).sum();
            let phase = if inner.norm() > 0.0 { inner / inner.norm() } else { c64::new(1.0, 0.0) };
            let resid: f64 = col.iter().zip(&other).map(|(x, y)| (*y - phase * x.conj()).norm_sqr()).sum::<f64>().sqrt();
            if resid > 1e-10 {
                return Err(Error::NotConjugateClosed(format!(
                    "direction at point {k} is not the conjugate of the direction at point {i}"
                )));
            }
            let ph = unit_phase_of_leading(&col).conj();
            for a in 0..m {
                dirs[(a, i)] = col[a] * ph;
                dirs[(a, k)] = (col[a] * ph).conj();
            }
            points[k] = s.conj();
            done[i] = true;
            done[k] = true;
        }
        Ok(Self { points, directions: dirs })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[c64] {
        &self.points
    }

    /// Directions as columns of an `m × r` matrix.
    pub fn directions(&self) -> MatRef<'_, c64> {
        self.directions.as_ref()
    }

    pub fn direction(&self, i: usize) -> Vec<c64> {
        (0..self.directions.nrows()).map(|a| self.directions[(a, i)]).collect()
    }

    /// Real points and conjugate pairs, in order of first appearance.
    pub fn slots(&self) -> Vec<Slot> {
        let r = self.len();
        let mut used = alloc::vec![false; r];
        let mut out = Vec::new();
        for i in 0..r {
            if used[i] {
                continue;
            }
            used[i] = true;
            if self.points[i].im == 0.0 {
                out.push(Slot::Real(i));
                continue;
            }
            let k = (0..r).find(|&k| !used[k] && self.points[k] == self.points[i].conj()).expect("validated closure");
            used[k] = true;
            if self.points[i].im > 0.0 { out.push(Slot::Pair(i, k)) } else { out.push(Slot::Pair(k, i)) }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_ph() -> PortHamiltonianSystem {
        let j = Mat::from_fn(2, 2, |a, b| [[0.0, 1.0], [-1.0, 0.0]][a][b]);
        let r = Mat::from_fn(2, 2, |a, b| if a == 1 && b == 1 { 1.0 } else { 0.0 });
        let b = Mat::from_fn(2, 1, |a, _| if a == 0 { 1.0 } else { 0.0 });
        build_ph(Matrix::Dense(j), Matrix::Dense(r), Matrix::identity(2), b).unwrap()
    }

    #[test]
    fn minimal_ph_instance_is_valid() {
        let ph = small_ph();
        let ss = ph_to_state_space(&ph);
        assert_eq!(ss.a().to_dense()[(0, 1)], 1.0);
        assert_eq!(ss.a().to_dense()[(1, 1)], -1.0);
    }

    #[test]
    fn indefinite_q_rejected() {
        let q = Mat::from_fn(2, 2, |a, b| if a == b { [1.0, -0.1][a] } else { 0.0 });
        let res = build_ph(Matrix::zeros(2, 2), Matrix::zeros(2, 2), Matrix::Dense(q), Mat::from_fn(2, 1, |_, _| 1.0));
        assert!(matches!(res, Err(Error::StructureViolation { kind: StructureKind::PositiveDefinite, .. })));
    }

    #[test]
    fn non_skew_j_rejected_small_asymmetry_projected() {
        let mut j = Mat::from_fn(2, 2, |a, b| [[0.0, 1.0], [-1.0, 0.0]][a][b]);
        j[(0, 1)] += 1e-14;
        let ph = build_ph(Matrix::Dense(j.clone()), Matrix::zeros(2, 2), Matrix::identity(2), Mat::from_fn(2, 1, |_, _| 1.0)).unwrap();
        assert_eq!(ph.j().non_skewness(), 0.0);
        j[(0, 1)] += 1e-3;
        let res = build_ph(Matrix::Dense(j), Matrix::zeros(2, 2), Matrix::identity(2), Mat::from_fn(2, 1, |_, _| 1.0));
        assert!(matches!(res, Err(Error::StructureViolation { kind: StructureKind::Skewness, .. })));
    }

    #[test]
    fn negative_r_rejected() {
        let r = Mat::from_fn(2, 2, |a, b| if a == b { -1e-3 } else { 0.0 });
        let res = build_ph(Matrix::zeros(2, 2), Matrix::Dense(r), Matrix::identity(2), Mat::from_fn(2, 1, |_, _| 1.0));
        assert!(matches!(res, Err(Error::StructureViolation { kind: StructureKind::PositiveSemidefinite, .. })));
    }

    #[test]
    fn dimension_violation() {
        let res = build_ph(Matrix::zeros(2, 2), Matrix::zeros(3, 3), Matrix::identity(2), Mat::from_fn(2, 1, |_, _| 1.0));
        assert!(matches!(res, Err(Error::StructureViolation { kind: StructureKind::Dimension, .. })));
    }

    #[test]
    fn scalar_transfer() {
        let one = || Mat::from_fn(1, 1, |_, _| 1.0);
        let sys = StateSpaceSystem::new(
            Some(Matrix::Dense(one())),
            Matrix::Dense(Mat::from_fn(1, 1, |_, _| -1.0)),
            one(),
            one(),
        )
        .unwrap();
        let g = eval_transfer(&sys, c64::new(0.0, 0.0)).unwrap();
        assert!((g[(0, 0)] - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(eval_transfer(&sys, c64::new(-1.0, 0.0)), Err(Error::SingularPencil { .. })));
    }

    #[test]
    fn singular_descriptor_rejected() {
        let e = Mat::from_fn(2, 2, |a, b| if a == 0 && b == 0 { 1.0 } else { 0.0 });
        let res = StateSpaceSystem::new(
            Some(Matrix::Dense(e)),
            Matrix::Dense(Mat::from_fn(2, 2, |a, b| if a == b { -1.0 } else { 0.0 })),
            Mat::from_fn(2, 1, |_, _| 1.0),
            Mat::from_fn(1, 2, |_, _| 1.0),
        );
        assert!(matches!(res, Err(Error::SingularDescriptor)));
    }

    #[test]
    fn power_balance_zero_and_lossless() {
        let ph = small_ph();
        let pb = power_balance(&ph, &[0.0, 0.0], &[1.0]);
        assert_eq!((pb.hamiltonian, pb.supplied, pb.dissipated), (0.0, 0.0, 0.0));
        let lossless = build_ph(ph.j().clone(), Matrix::zeros(2, 2), ph.q().clone(), ph.b().to_owned()).unwrap();
        let pb = power_balance(&lossless, &[0.3, -2.0], &[0.7]);
        assert_eq!(pb.dissipated, 0.0);
        assert!(pb.hamiltonian > 0.0);
    }

    #[test]
    fn interpolation_data_closure() {
        let pts = alloc::vec![c64::new(1.0, 2.0), c64::new(1.0, -2.0), c64::new(3.0, 0.0)];
        let d = Mat::from_fn(2, 3, |a, k| match k {
            0 => [c64::new(1.0, 1.0), c64::new(0.0, 2.0)][a],
            1 => [c64::new(1.0, -1.0), c64::new(0.0, -2.0)][a],
            _ => [c64::new(0.0, 3.0), c64::new(0.0, 4.0)][a],
        });
        let data = InterpolationData::new(pts.clone(), d).unwrap();
        assert_eq!(data.slots(), alloc::vec![Slot::Pair(0, 1), Slot::Real(2)]);
        assert!((data.directions()[(0, 2)].re.abs() - 0.6).abs() < 1e-15);
        assert_eq!(data.directions()[(0, 2)].im, 0.0);
        assert_eq!(data.direction(1)[0], data.direction(0)[0].conj());
        let bad = InterpolationData::new(pts[..1].to_vec(), Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0)));
        assert!(matches!(bad, Err(Error::NotConjugateClosed(_))));
        let dup = InterpolationData::new(
            alloc::vec![c64::new(1.0, 0.0), c64::new(1.0, 0.0)],
            Mat::from_fn(1, 2, |_, _| c64::new(1.0, 0.0)),
        );
        assert!(matches!(dup, Err(Error::InvalidInterpolationData(_))));
    }
}
