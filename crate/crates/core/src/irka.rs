//! IRKA-PH, unstructured IRKA, initialization strategies and optimality certificates.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use faer::prelude::*;
use faer::{Mat, MatRef, c64};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{
    ShiftedSolver, cond_2_c, dense_solve_c, norm_fro_c, orthonormalize, singular_values, to_complex,
};
use crate::reduction::{
    PhReduction, left_tangential_basis_with, petrov_galerkin_reduce, ph_reduce_with_basis, realify,
    tangential_basis_with,
};
use crate::system::{InterpolationData, PortHamiltonianSystem, StateSpaceSystem, ph_to_state_space};
use crate::{Error, Result, Warning};

/// Condition of the reduced eigenvector matrix above which the eigenproblem counts as defective.
pub const DEFECTIVE_COND: f64 = 1e12;
/// Relative shift perturbation applied before retrying a singular or defective step.
pub const SHIFT_PERTURBATION: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IrkaOptions {
    pub max_iterations: usize,
    pub shift_tolerance: f64,
    pub stagnation_window: usize,
}

impl Default for IrkaOptions {
    fn default() -> Self {
        Self { max_iterations: 100, shift_tolerance: 1e-6, stagnation_window: 5 }
    }
}

impl IrkaOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::BadParams("max_iterations must be at least 1".into()));
        }
        if !(self.shift_tolerance > 0.0) {
            return Err(Error::BadParams("shift_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Eigen-decomposition `A_r = X Λ X⁻¹` with the residue factors of `C_r (sI − A_r)⁻¹ B_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalData {
    /// Ordered ascending by `(Re, |Im|, sign Im)`; conjugate pairs are exact.
    pub eigenvalues: Vec<c64>,
    /// Right eigenvectors `X_r` with unit columns.
    pub right: Mat<c64>,
    /// `F_r = X_r⁻¹ B_r`; row `i` is `b_iᵀ`.
    pub input_residues: Mat<c64>,
    /// `C_r X_r`; column `i` is `c_i`.
    pub output_residues: Mat<c64>,
    /// 2-norm condition of `X_r`.
    pub condition: f64,
}

impl ModalData {
    pub fn b(&self, i: usize) -> Vec<c64> {
        (0..self.input_residues.ncols()).map(|a| self.input_residues[(i, a)]).collect()
    }

    pub fn c(&self, i: usize) -> Vec<c64> {
        (0..self.output_residues.nrows()).map(|a| self.output_residues[(a, i)]).collect()
    }

    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn eig_key(a: &c64, b: &c64) -> Ordering {
    a.re.total_cmp(&b.re)
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(a.im.signum().total_cmp(&b.im.signum()))
}

/// Modal form of the standard realization `(A, B, C)`.
pub fn modal_data(a: MatRef<'_, f64>, b: MatRef<'_, f64>, c: MatRef<'_, f64>) -> Result<ModalData> {
    let r = a.nrows();
    let evd = a.eigen().map_err(|_| Error::EigenNoConvergence)?;
    let vals: Vec<c64> = (0..r).map(|i| evd.S().column_vector()[i]).collect();
    let u = evd.U();
    let mut used = vec![false; r];
    // (eigenvalue with Im ≥ 0, its eigenvector, is_pair)
    let mut groups: Vec<(c64, Vec<c64>, bool)> = Vec::new();
    for i in 0..r {
        if used[i] {
            continue;
        }
        used[i] = true;
        if vals[i].im == 0.0 {
            groups.push((vals[i], (0..r).map(|k| c64::new(u[(k, i)].re, 0.0)).collect(), false));
            continue;
        }
        let target = vals[i].conj();
        let j = (0..r)
            .filter(|&j| !used[j])
            .min_by(|&x, &y| (vals[x] - target).norm().total_cmp(&(vals[y] - target).norm()));
        let Some(j) = j else {
            return Err(Error::DefectiveEigenproblem { condition: f64::INFINITY });
        };
        used[j] = true;
        let up = if vals[i].im > 0.0 { i } else { j };
        groups.push((vals[up], (0..r).map(|k| u[(k, up)]).collect(), true));
    }
    groups.sort_by(|x, y| eig_key(&x.0, &y.0));
    let mut eigenvalues = Vec::with_capacity(r);
    let mut x = Mat::<c64>::zeros(r, r);
    let mut col = 0;
    for (l, v, pair) in &groups {
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if *pair {
            eigenvalues.push(l.conj());
            for k in 0..r {
                x[(k, col)] = v[k].conj() / nrm;
            }
            col += 1;
        }
        eigenvalues.push(*l);
        for k in 0..r {
            x[(k, col)] = v[k] / nrm;
        }
        col += 1;
    }
    let condition = cond_2_c(x.as_ref());
    let f = dense_solve_c(x.as_ref(), to_complex(b).as_ref()).ok_or(Error::DefectiveEigenproblem { condition })?;
    let cx = to_complex(c) * &x;
    Ok(ModalData { eigenvalues, right: x, input_residues: f, output_residues: cx, condition })
}

/// One pass of the fixed-point iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IrkaIteration {
    pub shifts: Vec<c64>,
    /// Right tangent directions, `m × r`.
    pub directions: Mat<c64>,
    /// Left tangent directions (unstructured iteration only), `p × r`.
    pub left_directions: Option<Mat<c64>>,
    /// Poles of the model built from these shifts.
    pub eigenvalues: Vec<c64>,
    /// Relative change between these shifts and their reflected successors.
    pub change: f64,
    /// `‖G − G_r‖²_H2 − ‖G‖²_H2` for this iterate; NaN when unavailable.
    pub h2_proxy: f64,
    pub perturbed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrkaTrace {
    pub iterations: Vec<IrkaIteration>,
    /// Interpolation data the final model was built from.
    pub final_data: Option<InterpolationData>,
    pub final_left_data: Option<InterpolationData>,
    /// Modal data of the final model.
    pub modal: Option<ModalData>,
    /// Real basis `V̂` of the final model.
    pub final_basis: Option<Mat<f64>>,
    pub converged: bool,
    pub warnings: Vec<Warning>,
}

impl IrkaTrace {
    fn new() -> Self {
        Self {
            iterations: Vec::new(),
            final_data: None,
            final_left_data: None,
            modal: None,
            final_basis: None,
            converged: false,
            warnings: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations.len()
    }

    /// Final shift set, or the last iterated one if no final model exists.
    pub fn final_shifts(&self) -> Vec<c64> {
        match &self.final_data {
            Some(d) => d.points().to_vec(),
            None => self.iterations.last().map(|it| it.shifts.clone()).unwrap_or_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BestModel {
    Ph(PortHamiltonianSystem),
    General(StateSpaceSystem),
}

/// The iterate with the smallest H2 error estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct BestIterate {
    /// One-based iteration index.
    pub iteration: usize,
    pub h2_proxy: f64,
    pub model: BestModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureReason {
    MaxIterations,
    Stagnation,
}

#[derive(Clone, Debug)]
pub struct IrkaFailure {
    pub trace: IrkaTrace,
    pub best: Option<BestIterate>,
    pub reason: FailureReason,
}

/// Relative change `max_i |s_i' − s_i|/|s_i|` after greedy matching of the sorted sets.
pub fn shift_change(old: &[c64], new: &[c64]) -> f64 {
    let mut a = old.to_vec();
    a.sort_by(eig_key);
    let mut b = new.to_vec();
    b.sort_by(eig_key);
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for s in &a {
        let best = (0..b.len())
            .filter(|&j| !used[j])
            .min_by(|&x, &y| (b[x] - s).norm().total_cmp(&(b[y] - s).norm()));
        let Some(j) = best else {
            return f64::INFINITY;
        };
        used[j] = true;
        let d = (b[j] - s).norm();
        worst = worst.max(if s.norm() > 0.0 { d / s.norm() } else { d });
    }
    worst
}

fn logspace(lo: f64, hi: f64, r: usize) -> Vec<f64> {
    if r == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..r)
        .map(|k| match k {
            0 => lo,
            _ if k + 1 == r => hi,
            _ => 10f64.powf(a + (b - a) * k as f64 / (r - 1) as f64),
        })
        .collect()
}

fn check_range(r: usize, lo: f64, hi: f64) -> Result<()> {
    if r == 0 {
        return Err(Error::BadParams("reduction order must be at least 1".into()));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::BadParams(format!("need 0 < lo < hi, got lo = {lo}, hi = {hi}")));
    }
    Ok(())
}

/// Interpolation data at `points` with leading right singular vectors of `G(s_i)` as directions.
pub fn data_from_points(sys: &StateSpaceSystem, points: Vec<c64>) -> Result<InterpolationData> {
    let eval = sys.evaluator()?;
    let mut dirs = Mat::<c64>::zeros(sys.m(), points.len());
    for (i, &s) in points.iter().enumerate() {
        let g = eval.eval(s).map_err(|e| match e {
            Error::SingularPencil { re, im, .. } => Error::SingularPencil { re, im, index: Some(i) },
            other => other,
        })?;
        let svd = g.svd().map_err(|_| Error::EigenNoConvergence)?;
        let s_vals = svd.S().column_vector();
        let lead = (0..s_vals.nrows()).max_by(|&x, &y| s_vals[x].re.total_cmp(&s_vals[y].re)).unwrap_or(0);
        let v = svd.V();
        for a in 0..sys.m() {
            dirs[(a, i)] = v[(a, lead)];
        }
    }
    InterpolationData::new(points, dirs)
}

/// `r` real points logarithmically spaced on `[lo, hi]` with dominant right singular directions.
pub fn default_init(sys: &StateSpaceSystem, r: usize, lo: f64, hi: f64) -> Result<InterpolationData> {
    check_range(r, lo, hi)?;
    data_from_points(sys, logspace(lo, hi, r).into_iter().map(|x| c64::new(x, 0.0)).collect())
}

/// Initialization families for the fixed-point iterations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitStrategy {
    /// Real points logarithmically spaced on `[lo, hi]`.
    Logspace { lo: f64, hi: f64 },
    /// Points `−x` for `x` logarithmically spaced on `[lo, hi]`.
    LhpLogspace { lo: f64, hi: f64 },
    /// Conjugate pairs with logarithmically spaced real and imaginary parts.
    ComplexGrid { re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64 },
    /// Poles of the full model, smallest modulus first, scaled by `1 + eps`.
    PerturbedPoles { eps: f64 },
    /// Poles of the full model, smallest modulus first, reflected across the imaginary axis.
    ReflectedPoles,
    /// Real points drawn log-uniformly from `[lo, hi]`.
    Random { lo: f64, hi: f64, seed: u64 },
}

/// `r` poles of smallest modulus, keeping conjugate pairs together.
fn select_poles(sys: &StateSpaceSystem, r: usize) -> Result<Vec<c64>> {
    let mut poles = sys.poles()?;
    poles.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(eig_key(a, b)));
    let scale = poles.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut used = vec![false; poles.len()];
    let mut out = Vec::with_capacity(r);
    for i in 0..poles.len() {
        if out.len() == r {
            break;
        }
        if used[i] {
            continue;
        }
        let p = poles[i];
        if p.im.abs() <= 1e-12 * scale {
            used[i] = true;
            out.push(c64::new(p.re, 0.0));
            continue;
        }
        if out.len() + 2 > r {
            continue;
        }
        let partner = (i + 1..poles.len())
            .filter(|&k| !used[k])
            .min_by(|&x, &y| (poles[x] - p.conj()).norm().total_cmp(&(poles[y] - p.conj()).norm()));
        let Some(k) = partner else { continue };
        used[i] = true;
        used[k] = true;
        let up = if p.im > 0.0 { p } else { p.conj() };
        out.push(up);
        out.push(up.conj());
    }
    if out.len() < r {
        return Err(Error::BadParams(format!(
            "cannot select {r} poles without splitting a conjugate pair"
        )));
    }
    Ok(out)
}

/// Initial interpolation data of order `r` for the given strategy.
pub fn initial_data(sys: &StateSpaceSystem, r: usize, strategy: InitStrategy) -> Result<InterpolationData> {
    let points: Vec<c64> = match strategy {
        InitStrategy::Logspace { lo, hi } => return default_init(sys, r, lo, hi),
        InitStrategy::LhpLogspace { lo, hi } => {
            check_range(r, lo, hi)?;
            logspace(lo, hi, r).into_iter().map(|x| c64::new(-x, 0.0)).collect()
        }
        InitStrategy::ComplexGrid { re_lo, re_hi, im_lo, im_hi } => {
            check_range(r, re_lo, re_hi)?;
            check_range(r, im_lo, im_hi)?;
            let pairs = r / 2;
            let re = logspace(re_lo, re_hi, pairs.max(1));
            let im = logspace(im_lo, im_hi, pairs.max(1));
            let mut pts = Vec::with_capacity(r);
            for k in 0..pairs {
                pts.push(c64::new(re[k], im[k]));
                pts.push(c64::new(re[k], -im[k]));
            }
            if r % 2 == 1 {
                pts.push(c64::new(re_hi, 0.0));
            }
            pts
        }
        InitStrategy::PerturbedPoles { eps } => {
            if !(eps.is_finite() && eps != 0.0) {
                return Err(Error::BadParams(format!("pole perturbation must be finite and nonzero, got {eps}")));
            }
            select_poles(sys, r)?.into_iter().map(|p| p * (1.0 + eps)).collect()
        }
        InitStrategy::ReflectedPoles => select_poles(sys, r)?.into_iter().map(|p| -p.conj()).collect(),
        InitStrategy::Random { lo, hi, seed } => {
            check_range(r, lo, hi)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (lo.log10(), hi.log10());
            let mut xs: Vec<f64> = (0..r).map(|_| 10f64.powf(rng.gen_range(a..=b))).collect();
            xs.sort_by(f64::total_cmp);
            xs.into_iter().map(|x| c64::new(x, 0.0)).collect()
        }
    };
    data_from_points(sys, points)
}

/// Next interpolation data `s_i = −λ̂_i`, `b_i = F_r(i, :)ᵀ`.
fn reflected(modal: &ModalData) -> Result<InterpolationData> {
    let pts: Vec<c64> = modal.eigenvalues.iter().map(|l| -*l).collect();
    let f = &modal.input_residues;
    let dirs = Mat::from_fn(f.ncols(), f.nrows(), |a, i| f[(i, a)]);
    InterpolationData::new(pts, dirs).map_err(|_| Error::DefectiveEigenproblem { condition: modal.condition })
}

fn reflected_left(modal: &ModalData) -> Result<InterpolationData> {
    let pts: Vec<c64> = modal.eigenvalues.iter().map(|l| -*l).collect();
    InterpolationData::new(pts, modal.output_residues.clone())
        .map_err(|_| Error::DefectiveEigenproblem { condition: modal.condition })
}

fn perturbed(data: &InterpolationData) -> Result<InterpolationData> {
    let pts = data.points().iter().map(|s| *s * (1.0 + SHIFT_PERTURBATION)).collect();
    InterpolationData::new(pts, data.directions().to_owned())
}

/// Estimate `‖G − G_r‖² − ‖G‖²` from the modal data of `G_r` and the primitive columns
/// `(−λ̂_i I − A)⁻¹ B b̂_i` built at its reflected poles, where `b̂_i` are the unit
/// directions stored in `next`.
fn h2_proxy(modal: &ModalData, next: &InterpolationData, c_times_cols: MatRef<'_, c64>) -> f64 {
    let r = modal.eigenvalues.len();
    let mut total = c64::new(0.0, 0.0);
    for i in 0..r {
        let bi = modal.b(i);
        let ci = modal.c(i);
        let li = modal.eigenvalues[i];
        for j in 0..r {
            let bj = modal.b(j);
            let cj = modal.c(j);
            let cc: c64 = ci.iter().zip(&cj).map(|(x, y)| *x * *y).sum();
            let bb: c64 = bj.iter().zip(&bi).map(|(x, y)| *x * *y).sum();
            total += cc * bb / (-li - modal.eigenvalues[j]);
        }
        let d = next.direction(i);
        let alpha: c64 = d.iter().zip(&bi).map(|(x, y)| x.conj() * *y).sum();
        let cg: c64 = (0..ci.len()).map(|a| ci[a] * c_times_cols[(a, i)]).sum();
        total -= cg * alpha * 2.0;
    }
    total.re
}

struct PhStep {
    reduction: PhReduction,
    modal: ModalData,
    data: InterpolationData,
    cols: Mat<c64>,
    perturbed: bool,
}

fn ph_step_once(
    ph: &PortHamiltonianSystem,
    ss: &StateSpaceSystem,
    solver: &ShiftedSolver,
    data: &InterpolationData,
) -> Result<(PhReduction, ModalData, Mat<c64>)> {
    let basis = tangential_basis_with(ss, solver, data)?;
    let real = realify(&basis)?;
    let red = ph_reduce_with_basis(ph, real.columns.as_ref())?;
    let a = red.system.a().to_dense();
    let modal = modal_data(a.as_ref(), red.system.b(), red.system.c().as_ref())?;
    if !(modal.condition <= DEFECTIVE_COND) {
        return Err(Error::DefectiveEigenproblem { condition: modal.condition });
    }
    Ok((red, modal, basis.columns().to_owned()))
}

fn retryable(e: &Error) -> bool {
    matches!(e, Error::SingularPencil { .. } | Error::DefectiveEigenproblem { .. })
}

fn ph_step(
    ph: &PortHamiltonianSystem,
    ss: &StateSpaceSystem,
    solver: &ShiftedSolver,
    data: &InterpolationData,
    iteration: usize,
    warnings: &mut Vec<Warning>,
) -> Result<PhStep> {
    match ph_step_once(ph, ss, solver, data) {
        Ok((reduction, modal, cols)) => Ok(PhStep { reduction, modal, data: data.clone(), cols, perturbed: false }),
        Err(e) if retryable(&e) => {
            warnings.push(Warning::PerturbedShifts { iteration, reason: format!("{e}") });
            let data = perturbed(data)?;
            let (reduction, modal, cols) = ph_step_once(ph, ss, solver, &data)?;
            Ok(PhStep { reduction, modal, data, cols, perturbed: true })
        }
        Err(e) => Err(e),
    }
}

fn stagnated(trace: &IrkaTrace, window: usize) -> bool {
    if window < 2 || trace.iterations.len() < window {
        return false;
    }
    let recent = &trace.iterations[trace.iterations.len() - window..];
    let hi = recent.iter().map(|it| it.change).fold(f64::NEG_INFINITY, f64::max);
    let lo = recent.iter().map(|it| it.change).fold(f64::INFINITY, f64::min);
    hi.is_finite() && hi > 0.0 && (hi - lo) / hi < 0.1
}

fn pick_best(candidates: Vec<(usize, f64, BestModel)>) -> Option<BestIterate> {
    let mut best: Option<BestIterate> = None;
    for (iteration, h2_proxy, model) in candidates {
        let better = match &best {
            None => true,
            Some(b) => h2_proxy < b.h2_proxy || (b.h2_proxy.is_nan() && !h2_proxy.is_nan()),
        };
        if better {
            best = Some(BestIterate { iteration, h2_proxy, model });
        }
    }
    best
}

/// Structure-preserving IRKA (IRKA-PH). Returns the final reduced model and the trace.
pub fn irka_ph(
    ph: &PortHamiltonianSystem,
    init: &InterpolationData,
    opts: &IrkaOptions,
) -> Result<(PortHamiltonianSystem, IrkaTrace)> {
    opts.validate()?;
    if init.directions().nrows() != ph.m() {
        return Err(Error::DimensionMismatch(format!(
            "initial directions have {} rows, system has {} inputs",
            init.directions().nrows(),
            ph.m()
        )));
    }
    if init.len() > ph.n() {
        return Err(Error::BadParams(format!("reduction order {} exceeds n = {}", init.len(), ph.n())));
    }
    let ss = ph_to_state_space(ph);
    let solver = ss.solver()?;
    let c = to_complex(ss.c());
    let mut trace = IrkaTrace::new();
    let mut candidates: Vec<(usize, f64, BestModel)> = Vec::new();
    let mut data = init.clone();
    let mut prev: Option<ModalData> = None;
    for k in 1..=opts.max_iterations {
        let step = ph_step(ph, &ss, &solver, &data, k, &mut trace.warnings)?;
        if let Some(pm) = prev.take() {
            let it = &mut trace.iterations[k - 2];
            if !step.perturbed {
                it.h2_proxy = h2_proxy(&pm, &step.data, (&c * &step.cols).as_ref());
                candidates[k - 2].1 = it.h2_proxy;
            }
        }
        let next = reflected(&step.modal)?;
        let change = shift_change(step.data.points(), next.points());
        trace.iterations.push(IrkaIteration {
            shifts: step.data.points().to_vec(),
            directions: step.data.directions().to_owned(),
            left_directions: None,
            eigenvalues: step.modal.eigenvalues.clone(),
            change,
            h2_proxy: f64::NAN,
            perturbed: step.perturbed,
        });
        candidates.push((k, f64::NAN, BestModel::Ph(step.reduction.system.clone())));
        if change < opts.shift_tolerance {
            let fin = ph_step(ph, &ss, &solver, &next, k + 1, &mut trace.warnings)?;
            if !fin.perturbed {
                trace.iterations[k - 1].h2_proxy = h2_proxy(&step.modal, &fin.data, (&c * &fin.cols).as_ref());
            }
            trace.converged = true;
            trace.final_data = Some(fin.data);
            trace.modal = Some(fin.modal);
            trace.final_basis = Some(fin.reduction.basis);
            trace.warnings.extend(fin.reduction.warnings);
            return Ok((fin.reduction.system, trace));
        }
        let stuck = stagnated(&trace, opts.stagnation_window);
        if stuck || k == opts.max_iterations {
            let mut scratch = Vec::new();
            if let Ok(last) = ph_step(ph, &ss, &solver, &next, k + 1, &mut scratch) {
                if !last.perturbed {
                    let j = h2_proxy(&step.modal, &last.data, (&c * &last.cols).as_ref());
                    trace.iterations[k - 1].h2_proxy = j;
                    candidates[k - 1].1 = j;
                }
            }
            let reason = if stuck { FailureReason::Stagnation } else { FailureReason::MaxIterations };
            return Err(Error::MaxIterationsExceeded(Box::new(IrkaFailure {
                trace,
                best: pick_best(candidates),
                reason,
            })));
        }
        prev = Some(step.modal);
        data = next;
    }
    unreachable!("loop returns on the last iteration")
}

struct GeneralStep {
    model: StateSpaceSystem,
    modal: ModalData,
    right: InterpolationData,
    left: InterpolationData,
    cols: Mat<c64>,
    perturbed: bool,
}

fn general_step_once(
    sys: &StateSpaceSystem,
    solver: &ShiftedSolver,
    right: &InterpolationData,
    left: &InterpolationData,
) -> Result<(StateSpaceSystem, ModalData, Mat<c64>)> {
    let vb = tangential_basis_with(sys, solver, right)?;
    let wb = left_tangential_basis_with(sys, solver, left)?;
    let v = realify(&vb)?;
    let w = realify(&wb)?;
    let model = petrov_galerkin_reduce(sys, v.columns.as_ref(), w.columns.as_ref())?;
    let std = model.to_standard().map_err(|_| Error::SingularReducedPencil)?;
    let modal = modal_data(std.a().to_dense().as_ref(), std.b(), std.c())?;
    if !(modal.condition <= DEFECTIVE_COND) {
        return Err(Error::DefectiveEigenproblem { condition: modal.condition });
    }
    Ok((model, modal, vb.columns().to_owned()))
}

fn general_step(
    sys: &StateSpaceSystem,
    solver: &ShiftedSolver,
    right: &InterpolationData,
    left: &InterpolationData,
    iteration: usize,
    warnings: &mut Vec<Warning>,
) -> Result<GeneralStep> {
    match general_step_once(sys, solver, right, left) {
        Ok((model, modal, cols)) => {
            Ok(GeneralStep { model, modal, right: right.clone(), left: left.clone(), cols, perturbed: false })
        }
        Err(e) if retryable(&e) => {
            warnings.push(Warning::PerturbedShifts { iteration, reason: format!("{e}") });
            let (right, left) = (perturbed(right)?, perturbed(left)?);
            let (model, modal, cols) = general_step_once(sys, solver, &right, &left)?;
            Ok(GeneralStep { model, modal, right, left, cols, perturbed: true })
        }
        Err(e) => Err(e),
    }
}

/// Left directions `G(s_i) b_i / ‖G(s_i) b_i‖` matching a right interpolation set.
fn initial_left(sys: &StateSpaceSystem, right: &InterpolationData) -> Result<InterpolationData> {
    let eval = sys.evaluator()?;
    let mut dirs = Mat::<c64>::zeros(sys.p(), right.len());
    for i in 0..right.len() {
        let g = eval.eval(right.points()[i])?;
        let gb = g * Mat::from_fn(sys.m(), 1, |a, _| right.directions()[(a, i)]);
        let nrm = norm_fro_c(gb.as_ref());
        for a in 0..sys.p() {
            dirs[(a, i)] = if nrm > 0.0 { gb[(a, 0)] / nrm } else { c64::new(if a == 0 { 1.0 } else { 0.0 }, 0.0) };
        }
    }
    InterpolationData::new(right.points().to_vec(), dirs)
}

/// Unstructured bitangential IRKA. Intermediate models may be unstable; this is
/// recorded as a warning rather than an error.
pub fn irka_general(
    sys: &StateSpaceSystem,
    init: &InterpolationData,
    opts: &IrkaOptions,
) -> Result<(StateSpaceSystem, IrkaTrace)> {
    opts.validate()?;
    if init.directions().nrows() != sys.m() {
        return Err(Error::DimensionMismatch(format!(
            "initial directions have {} rows, system has {} inputs",
            init.directions().nrows(),
            sys.m()
        )));
    }
    if init.len() > sys.n() {
        return Err(Error::BadParams(format!("reduction order {} exceeds n = {}", init.len(), sys.n())));
    }
    let solver = sys.solver()?;
    let c = to_complex(sys.c());
    let mut trace = IrkaTrace::new();
    let mut candidates: Vec<(usize, f64, BestModel)> = Vec::new();
    let mut right = init.clone();
    let mut left = initial_left(sys, init)?;
    let mut prev: Option<ModalData> = None;
    for k in 1..=opts.max_iterations {
        let step = general_step(sys, &solver, &right, &left, k, &mut trace.warnings)?;
        let abscissa = step.modal.spectral_abscissa();
        if abscissa >= 0.0 {
            trace.warnings.push(Warning::UnstableIterate { iteration: k, abscissa });
        }
        if let Some(pm) = prev.take() {
            if !step.perturbed {
                let j = h2_proxy(&pm, &step.right, (&c * &step.cols).as_ref());
                trace.iterations[k - 2].h2_proxy = j;
                candidates[k - 2].1 = j;
            }
        }
        let next_right = reflected(&step.modal)?;
        let next_left = reflected_left(&step.modal)?;
        let change = shift_change(step.right.points(), next_right.points());
        trace.iterations.push(IrkaIteration {
            shifts: step.right.points().to_vec(),
            directions: step.right.directions().to_owned(),
            left_directions: Some(step.left.directions().to_owned()),
            eigenvalues: step.modal.eigenvalues.clone(),
            change,
            h2_proxy: f64::NAN,
            perturbed: step.perturbed,
        });
        candidates.push((k, f64::NAN, BestModel::General(step.model.clone())));
        if change < opts.shift_tolerance {
            let fin = general_step(sys, &solver, &next_right, &next_left, k + 1, &mut trace.warnings)?;
            if !fin.perturbed {
                trace.iterations[k - 1].h2_proxy = h2_proxy(&step.modal, &fin.right, (&c * &fin.cols).as_ref());
            }
            trace.converged = true;
            trace.final_data = Some(fin.right);
            trace.final_left_data = Some(fin.left);
            trace.modal = Some(fin.modal);
            return Ok((fin.model, trace));
        }
        let stuck = stagnated(&trace, opts.stagnation_window);
        if stuck || k == opts.max_iterations {
            let reason = if stuck { FailureReason::Stagnation } else { FailureReason::MaxIterations };
            return Err(Error::MaxIterationsExceeded(Box::new(IrkaFailure {
                trace,
                best: pick_best(candidates),
                reason,
            })));
        }
        prev = Some(step.modal);
        right = next_right;
        left = next_left;
    }
    unreachable!("loop returns on the last iteration")
}

/// Relative residuals of the three first-order H2 optimality conditions, one per reduced pole.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityResiduals {
    /// `‖G(−λ̂_k)b_k − G_r(−λ̂_k)b_k‖ / ‖G(−λ̂_k)b_k‖`.
    pub res_b: Vec<f64>,
    /// `‖c_kᵀG(−λ̂_k) − c_kᵀG_r(−λ̂_k)‖ / ‖c_kᵀG(−λ̂_k)‖`.
    pub res_c: Vec<f64>,
    /// `|c_kᵀG'(−λ̂_k)b_k − c_kᵀG_r'(−λ̂_k)b_k| / |c_kᵀG'(−λ̂_k)b_k|`.
    pub res_h: Vec<f64>,
}

impl OptimalityResiduals {
    pub fn max_b(&self) -> f64 {
        self.res_b.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_c(&self) -> f64 {
        self.res_c.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_h(&self) -> f64 {
        self.res_h.iter().copied().fold(0.0, f64::max)
    }
}

/// `(G(s)b, Gᵀ(s)c, cᵀG'(s)b)`.
fn bitangential(
    sys: &StateSpaceSystem,
    solver: &ShiftedSolver,
    s: c64,
    b: &[c64],
    c: &[c64],
) -> Result<(Mat<c64>, Mat<c64>, c64)> {
    let f = solver.factor(s)?;
    let bb = to_complex(sys.b()) * Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let cc = to_complex(sys.c().transpose()) * Mat::from_fn(c.len(), 1, |i, _| c[i]);
    let v = f.solve(bb.as_ref())?;
    let w = f.solve_transpose(cc.as_ref())?;
    let gb = to_complex(sys.c()) * &v;
    let gc = to_complex(sys.b().transpose()) * &w;
    let ev = sys.e_mul_c(v.as_ref());
    let d: c64 = (0..sys.n()).map(|i| w[(i, 0)] * ev[(i, 0)]).sum();
    Ok((gb, gc, -d))
}

/// Minimum pairwise pole separation, relative to the largest pole modulus.
fn separation(eigs: &[c64]) -> f64 {
    let scale = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut sep = f64::INFINITY;
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            sep = sep.min((eigs[i] - eigs[j]).norm() / scale);
        }
    }
    sep
}

/// Residuals of the bitangential Hermite conditions at the reflected reduced poles.
pub fn h2_optimality_residuals(full: &StateSpaceSystem, reduced: &StateSpaceSystem) -> Result<OptimalityResiduals> {
    if full.m() != reduced.m() || full.p() != reduced.p() {
        return Err(Error::DimensionMismatch("systems differ in m or p".into()));
    }
    let std = reduced.to_standard()?;
    let modal = modal_data(std.a().to_dense().as_ref(), std.b(), std.c())?;
    if separation(&modal.eigenvalues) <= 1e-10 || !(modal.condition <= DEFECTIVE_COND) {
        return Err(Error::RepeatedPoles);
    }
    let fs = full.solver()?;
    let rs = std.solver()?;
    let mut out = OptimalityResiduals { res_b: Vec::new(), res_c: Vec::new(), res_h: Vec::new() };
    for k in 0..modal.eigenvalues.len() {
        let s = -modal.eigenvalues[k];
        let (b, c) = (modal.b(k), modal.c(k));
        let (gb, gc, gd) = bitangential(full, &fs, s, &b, &c)?;
        let (rb, rc, rd) = bitangential(&std, &rs, s, &b, &c)?;
        let tiny = f64::MIN_POSITIVE;
        out.res_b.push(norm_fro_c((&gb - &rb).as_ref()) / norm_fro_c(gb.as_ref()).max(tiny));
        out.res_c.push(norm_fro_c((&gc - &rc).as_ref()) / norm_fro_c(gc.as_ref()).max(tiny));
        out.res_h.push((gd - rd).norm() / gd.norm().max(tiny));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityCertificate {
    /// `‖AV_r + V_rΛ + BF_rᵀ‖_F / ‖BF_rᵀ‖_F`.
    pub sylvester_residual: f64,
    /// `‖A_rK_r + K_rA_rᵀ + B_rB_rᵀ‖_F / ‖B_rB_rᵀ‖_F`.
    pub lyapunov_residual: f64,
    /// `max Re λ̂_i`.
    pub spectral_abscissa: f64,
    pub k_r_condition: f64,
}

/// Sylvester and reduced Lyapunov certificates of a converged IRKA-PH run.
///
/// `v_hat` is the real basis of the final model (available as `trace.final_basis`).
pub fn stability_certificate(
    ph: &PortHamiltonianSystem,
    trace: &IrkaTrace,
    v_hat: MatRef<'_, f64>,
) -> Result<StabilityCertificate> {
    if !trace.converged {
        return Err(Error::NotConverged);
    }
    let modal = trace.modal.as_ref().ok_or(Error::NotConverged)?;
    let n = ph.n();
    let r = modal.eigenvalues.len();
    if v_hat.nrows() != n || v_hat.ncols() != r {
        return Err(Error::DimensionMismatch(format!("basis is {}x{}, expected {n}x{r}", v_hat.nrows(), v_hat.ncols())));
    }
    let ss = ph_to_state_space(ph);
    let solver = ss.solver()?;
    let bc = to_complex(ss.b());
    let f = &modal.input_residues;
    // B F_rᵀ, column i = B f_i
    let bft = &bc * f.transpose();
    let mut vr = Mat::<c64>::zeros(n, r);
    for i in 0..r {
        let col = solver.factor(-modal.eigenvalues[i])?.solve(bft.col(i).as_mat())?;
        vr.col_mut(i).copy_from(col.col(0));
    }
    let mut syl = ss.a().mul_c(vr.as_ref());
    for i in 0..r {
        for a in 0..n {
            syl[(a, i)] += vr[(a, i)] * modal.eigenvalues[i] + bft[(a, i)];
        }
    }
    let sylvester_residual = norm_fro_c(syl.as_ref()) / norm_fro_c(bft.as_ref()).max(f64::MIN_POSITIVE);
    let m = vr.qr().solve_lstsq(to_complex(v_hat).as_ref());
    let x = &modal.right;
    let k = dense_solve_c(m.as_ref(), x.transpose()).ok_or(Error::DefectiveEigenproblem { condition: f64::INFINITY })?;
    let lam = Mat::from_fn(r, r, |i, j| if i == j { modal.eigenvalues[i] } else { c64::new(0.0, 0.0) });
    let xinv = dense_solve_c(x.as_ref(), Mat::<c64>::identity(r, r).as_ref())
        .ok_or(Error::DefectiveEigenproblem { condition: modal.condition })?;
    let ar = x * &lam * &xinv;
    let br = x * f;
    let bbt = &br * br.transpose();
    let lyap = &ar * &k + &k * ar.transpose() + &bbt;
    Ok(StabilityCertificate {
        sylvester_residual,
        lyapunov_residual: norm_fro_c(lyap.as_ref()) / norm_fro_c(bbt.as_ref()).max(f64::MIN_POSITIVE),
        spectral_abscissa: modal.spectral_abscissa(),
        k_r_condition: cond_2_c(k.as_ref()),
    })
}

/// Real orthonormal basis for the span of conjugate-closed complex columns.
fn real_span(cols: &Mat<c64>, eigs: &[c64]) -> Mat<f64> {
    let n = cols.nrows();
    let mut raw = Mat::<f64>::zeros(n, cols.ncols());
    let mut j = 0;
    let mut i = 0;
    while i < eigs.len() {
        if eigs[i].im == 0.0 {
            for a in 0..n {
                raw[(a, j)] = cols[(a, i)].re;
            }
            j += 1;
            i += 1;
        } else {
            // modal ordering puts the lower member of each pair first
            for a in 0..n {
                raw[(a, j)] = cols[(a, i)].re;
                raw[(a, j + 1)] = cols[(a, i)].im;
            }
            j += 2;
            i += 2;
        }
    }
    for c in 0..raw.ncols() {
        let nrm = raw.col(c).norm_l2();
        if nrm > 0.0 {
            for a in 0..n {
                raw[(a, c)] /= nrm;
            }
        }
    }
    orthonormalize(raw.as_ref(), 0.0).0
}

/// Largest principal angle (radians) between the two subspaces of the range condition
/// under which IRKA-PH also satisfies the remaining H2 optimality conditions.
pub fn range_condition_check(ph: &PortHamiltonianSystem, reduced: &StateSpaceSystem) -> Result<f64> {
    if reduced.m() != ph.m() || reduced.p() != ph.m() {
        return Err(Error::DimensionMismatch("reduced model must have as many inputs and outputs as the PH system".into()));
    }
    let std = reduced.to_standard()?;
    let modal = modal_data(std.a().to_dense().as_ref(), std.b(), std.c())?;
    if separation(&modal.eigenvalues) <= 1e-10 {
        return Err(Error::RepeatedPoles);
    }
    let n = ph.n();
    let r = modal.eigenvalues.len();
    let a1 = ph.j().lin_comb(1.0, ph.r(), -1.0).matmul(ph.q());
    let a2 = ph.j().lin_comb(-1.0, ph.r(), -1.0).matmul(ph.q());
    let s1 = ShiftedSolver::new(None, &a1)?;
    let s2 = ShiftedSolver::new(None, &a2)?;
    let bc = to_complex(ph.b());
    let mut v1 = Mat::<c64>::zeros(n, r);
    let mut v2 = Mat::<c64>::zeros(n, r);
    for i in 0..r {
        // (λI + A)⁻¹ = −(−λI − A)⁻¹; the sign does not change the span
        let s = -modal.eigenvalues[i];
        let bb = &bc * Mat::from_fn(ph.m(), 1, |a, _| modal.input_residues[(i, a)]);
        let cc = &bc * Mat::from_fn(ph.m(), 1, |a, _| modal.output_residues[(a, i)]);
        let x1 = s1.factor(s)?.solve(bb.as_ref())?;
        let x2 = s2.factor(s)?.solve(cc.as_ref())?;
        v1.col_mut(i).copy_from(x1.col(0));
        v2.col_mut(i).copy_from(x2.col(0));
    }
    let q1 = real_span(&v1, &modal.eigenvalues);
    let q2 = real_span(&v2, &modal.eigenvalues);
    let proj = &q2 - &q1 * (q1.transpose() * &q2);
    let smax = singular_values(proj.as_ref()).first().copied().unwrap_or(0.0);
    Ok(smax.min(1.0).asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::relative_h2_error;
    use crate::linalg::Matrix;
    use crate::models::{LadderParams, MsdParams, build_ladder, build_msd};
    use crate::system::eval_transfer;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn msd(n: usize) -> PortHamiltonianSystem {
        build_msd(&MsdParams::benchmark(n)).unwrap()
    }

    #[test]
    fn shift_change_matches_sets() {
        let a = [c(1.0, 0.0), c(2.0, 1.0), c(2.0, -1.0)];
        let b = [c(2.0, -1.0), c(1.0, 0.0), c(2.0, 1.0)];
        assert_eq!(shift_change(&a, &b), 0.0);
        let moved = [c(1.1, 0.0), c(2.0, 1.0), c(2.0, -1.0)];
        assert!((shift_change(&a, &moved) - 0.1).abs() < 1e-12);
        assert_eq!(shift_change(&a, &b[..2]), f64::INFINITY);
    }

    #[test]
    fn modal_residues_rebuild_transfer() {
        let a = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => -1.0,
            (1, 1) | (2, 2) => -0.5,
            (1, 2) => 2.0,
            (2, 1) => -2.0,
            (0, 1) => 0.3,
            _ => 0.0,
        });
        let b = Mat::from_fn(3, 2, |i, j| 1.0 + i as f64 - j as f64);
        let cm = Mat::from_fn(2, 3, |i, j| (i + 2 * j) as f64 * 0.5 - 1.0);
        let md = modal_data(a.as_ref(), b.as_ref(), cm.as_ref()).unwrap();
        assert!((md.spectral_abscissa() + 0.5).abs() < 1e-12);
        let sys = StateSpaceSystem::new(None, Matrix::Dense(a), b, cm).unwrap();
        let s = c(0.3, 1.7);
        let g = eval_transfer(&sys, s).unwrap();
        let mut sum = Mat::<c64>::zeros(2, 2);
        for i in 0..3 {
            let (ci, bi) = (md.c(i), md.b(i));
            for p in 0..2 {
                for q in 0..2 {
                    sum[(p, q)] += ci[p] * bi[q] / (s - md.eigenvalues[i]);
                }
            }
        }
        assert!(norm_fro_c((&g - &sum).as_ref()) < 1e-12 * norm_fro_c(g.as_ref()));
    }

    #[test]
    fn irka_ph_fixed_point() {
        let ph = msd(30);
        let ss = ph_to_state_space(&ph);
        let init = default_init(&ss, 4, 1e-2, 1e0).unwrap();
        let opts = IrkaOptions { max_iterations: 300, stagnation_window: 0, ..Default::default() };
        let (red, trace) = irka_ph(&ph, &init, &opts).unwrap();
        assert!(trace.converged);
        assert!(red.structure_report().unwrap().passes());
        let rss = ph_to_state_space(&red);
        let mut mirrored: Vec<c64> = rss.poles().unwrap().into_iter().map(|l| -l).collect();
        mirrored.sort_by(eig_key);
        assert!(shift_change(&trace.final_shifts(), &mirrored) < 1e-5);
        let res = h2_optimality_residuals(&ss, &rss).unwrap();
        assert!(res.max_b() < 1e-4, "res_b {}", res.max_b());
        let basis = trace.final_basis.clone().unwrap();
        let cert = stability_certificate(&ph, &trace, basis.as_ref()).unwrap();
        assert!(cert.sylvester_residual < 1e-8);
        assert!(cert.spectral_abscissa < 0.0);
        let angle = range_condition_check(&ph, &rss).unwrap();
        assert!((0.0..=core::f64::consts::FRAC_PI_2).contains(&angle));
    }

    #[test]
    fn irka_general_full_order_is_exact() {
        let ph = build_ladder(&LadderParams::benchmark(6)).unwrap();
        let ss = ph_to_state_space(&ph);
        let init = default_init(&ss, 6, 1e-1, 1e1).unwrap();
        let (red, trace) = irka_general(&ss, &init, &IrkaOptions::default()).unwrap();
        assert!(trace.converged);
        let err = relative_h2_error(&ss, &red).unwrap();
        assert!(err < 1e-8, "rel H2 {err}");
    }

    #[test]
    fn iteration_cap_keeps_best_iterate() {
        let ph = msd(30);
        let ss = ph_to_state_space(&ph);
        let init = default_init(&ss, 6, 1e-3, 1e-1).unwrap();
        let opts = IrkaOptions { max_iterations: 2, ..Default::default() };
        let Err(Error::MaxIterationsExceeded(f)) = irka_ph(&ph, &init, &opts) else {
            panic!("expected the iteration cap to trigger");
        };
        assert_eq!(f.reason, FailureReason::MaxIterations);
        assert_eq!(f.trace.iterations(), 2);
        assert!(!f.trace.converged);
        let best = f.best.unwrap();
        assert!(best.iteration >= 1 && best.iteration <= 2);
        assert!(matches!(best.model, BestModel::Ph(_)));
        let basis = Mat::<f64>::zeros(30, 6);
        assert!(matches!(stability_certificate(&ph, &f.trace, basis.as_ref()), Err(Error::NotConverged)));
    }

    #[test]
    fn bad_options_and_shapes() {
        let ph = msd(10);
        let ss = ph_to_state_space(&ph);
        let init = default_init(&ss, 2, 1e-2, 1e0).unwrap();
        let zero = IrkaOptions { max_iterations: 0, ..Default::default() };
        assert!(matches!(irka_ph(&ph, &init, &zero), Err(Error::BadParams(_))));
        let tol = IrkaOptions { shift_tolerance: 0.0, ..Default::default() };
        assert!(matches!(irka_general(&ss, &init, &tol), Err(Error::BadParams(_))));
        let one_input = InterpolationData::new(vec![c(1.0, 0.0)], Mat::from_fn(1, 1, |_, _| c(1.0, 0.0))).unwrap();
        assert!(matches!(irka_ph(&ph, &one_input, &IrkaOptions::default()), Err(Error::DimensionMismatch(_))));
        assert!(default_init(&ss, 0, 1e-2, 1e0).is_err());
        assert!(default_init(&ss, 2, 1e0, 1e-2).is_err());
    }

    #[test]
    fn init_families() {
        let ss = ph_to_state_space(&msd(20));
        let strategies = [
            InitStrategy::Logspace { lo: 1e-3, hi: 1e-1 },
            InitStrategy::LhpLogspace { lo: 1e-3, hi: 1e-1 },
            InitStrategy::ComplexGrid { re_lo: 1e-3, re_hi: 1e-1, im_lo: 1e-2, im_hi: 1e0 },
            InitStrategy::PerturbedPoles { eps: 1e-2 },
            InitStrategy::ReflectedPoles,
            InitStrategy::Random { lo: 1e-3, hi: 1e-1, seed: 3 },
        ];
        for st in strategies {
            let d = initial_data(&ss, 6, st).unwrap();
            assert_eq!(d.len(), 6);
            let pts = d.points();
            for p in pts {
                assert!(pts.iter().any(|q| (*q - p.conj()).norm() <= 1e-14 * p.norm()), "{st:?} not closed");
            }
            if st == InitStrategy::ReflectedPoles {
                assert!(pts.iter().all(|p| p.re > 0.0));
            }
        }
        let a = initial_data(&ss, 4, InitStrategy::Random { lo: 1e-3, hi: 1e-1, seed: 9 }).unwrap();
        let b = initial_data(&ss, 4, InitStrategy::Random { lo: 1e-3, hi: 1e-1, seed: 9 }).unwrap();
        assert_eq!(a.points(), b.points());
        assert!(initial_data(&ss, 4, InitStrategy::PerturbedPoles { eps: 0.0 }).is_err());
        // the MSD poles are all complex, so an odd count would split a pair
        assert!(matches!(initial_data(&ss, 3, InitStrategy::ReflectedPoles), Err(Error::BadParams(_))));
    }
}
