//! Error metrics, frequency responses, error systems and time-domain simulation.

mod quadrature;
mod simulate;

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use faer::{Mat, c64};
use num_traits::Float;

use crate::linalg::{self, DEFAULT_DENSE_CEILING, Matrix, singular_values_c};
use crate::system::StateSpaceSystem;
use crate::{Error, Result, Warning};

pub use quadrature::h2_norm_quadrature;
pub use simulate::{
    EnergyAudit, InputSignal, SignalKind, SimOptions, SolverStats, Trajectory, make_signal, simulate, simulate_ph,
};

/// Sampling frequencies in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::BadParams("frequency grid is empty".into()));
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::BadParams("frequencies must be finite and positive".into()));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadParams("frequencies must be strictly increasing".into()));
        }
        Ok(Self { omegas })
    }

    /// `n` points logarithmically spaced on `[lo, hi]`.
    pub fn logspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo > 0.0 && hi >= lo && hi.is_finite()) || (n > 1 && hi == lo) {
            return Err(Error::BadParams(format!("invalid grid logspace:{lo}:{hi}:{n}")));
        }
        if n == 1 {
            return Self::new(alloc::vec![lo]);
        }
        let (a, b) = (lo.log10(), hi.log10());
        let omegas = (0..n)
            .map(|k| match k {
                0 => lo,
                _ if k + 1 == n => hi,
                _ => 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64),
            })
            .collect();
        Self::new(omegas)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

impl Default for FrequencyGrid {
    /// 500 points on `[1e-4, 1e4]`.
    fn default() -> Self {
        Self::logspace(1e-4, 1e4, 500).expect("default grid is valid")
    }
}

/// How an H2 norm was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum H2Method {
    Gramian,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H2Norm {
    pub value: f64,
    pub method: H2Method,
}

/// H2 norm from the controllability Gramian, `sqrt(trace(C P Cᵀ)) = ‖C L‖_F` with `P = L Lᴴ`.
pub fn h2_norm(sys: &StateSpaceSystem) -> Result<f64> {
    h2_norm_gramian(sys, DEFAULT_DENSE_CEILING)
}

pub fn h2_norm_gramian(sys: &StateSpaceSystem, ceiling: usize) -> Result<f64> {
    if sys.n() > ceiling {
        return Err(Error::SizeLimitExceeded { n: sys.n(), limit: ceiling });
    }
    let std_sys = sys.to_standard()?;
    let a = std_sys.a().to_dense();
    let l = linalg::schur::lyapunov_factor(a.as_ref(), std_sys.b(), ceiling)?;
    let cl = linalg::to_complex(std_sys.c()) * l;
    Ok(linalg::norm_fro_c(cl.as_ref()))
}

/// Gramian below the ceiling, otherwise frequency-domain quadrature.
pub fn h2_norm_auto(sys: &StateSpaceSystem, ceiling: usize) -> Result<H2Norm> {
    if sys.n() <= ceiling {
        Ok(H2Norm { value: h2_norm_gramian(sys, ceiling)?, method: H2Method::Gramian })
    } else {
        Ok(H2Norm { value: h2_norm_quadrature(sys, 1e-4)?, method: H2Method::Quadrature })
    }
}

/// Realization of `G − G_r` with block-diagonal dynamics.
pub fn error_system(full: &StateSpaceSystem, reduced: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    if full.m() != reduced.m() || full.p() != reduced.p() {
        return Err(Error::DimensionMismatch(format!(
            "full system is {}x{}, reduced is {}x{}",
            full.p(),
            full.m(),
            reduced.p(),
            reduced.m()
        )));
    }
    let (n, r) = (full.n(), reduced.n());
    let stack = |x: &Matrix, y: &Matrix| {
        let mut t = x.triplets();
        t.extend(y.triplets().into_iter().map(|(i, j, v)| (i + n, j + n, v)));
        let m = Matrix::from_triplets(n + r, n + r, &t);
        if x.is_sparse() { m } else { Matrix::Dense(m.to_dense()) }
    };
    let e = match (full.e(), reduced.e()) {
        (None, None) => None,
        _ => Some(stack(&full.e_matrix(), &reduced.e_matrix())),
    };
    let a = stack(full.a(), reduced.a());
    let b = Mat::from_fn(n + r, full.m(), |i, j| if i < n { full.b()[(i, j)] } else { reduced.b()[(i - n, j)] });
    let c = Mat::from_fn(full.p(), n + r, |i, j| if j < n { full.c()[(i, j)] } else { -reduced.c()[(i, j - n)] });
    StateSpaceSystem::new(e, a, b, c)
}

/// `‖G − G_r‖_H2 / ‖G‖_H2`, both by Gramians.
pub fn relative_h2_error(full: &StateSpaceSystem, reduced: &StateSpaceSystem) -> Result<f64> {
    relative_h2_error_with(full, reduced, DEFAULT_DENSE_CEILING).map(|h| h.value)
}

pub fn relative_h2_error_with(full: &StateSpaceSystem, reduced: &StateSpaceSystem, ceiling: usize) -> Result<H2Norm> {
    let err = error_system(full, reduced)?;
    let num = h2_norm_auto(&err, ceiling)?;
    let den = h2_norm_auto(full, ceiling)?;
    let method = if num.method == H2Method::Quadrature || den.method == H2Method::Quadrature {
        H2Method::Quadrature
    } else {
        H2Method::Gramian
    };
    Ok(H2Norm { value: num.value / den.value, method })
}

/// Largest singular value of `G(iω)` over the grid, skipping singular points.
///
/// This is a lower bound of the H∞ norm.
pub fn hinf_sampled(sys: &StateSpaceSystem, grid: &FrequencyGrid) -> Result<f64> {
    hinf_sampled_detailed(sys, grid).map(|(v, _)| v)
}

pub fn hinf_sampled_detailed(sys: &StateSpaceSystem, grid: &FrequencyGrid) -> Result<(f64, Vec<Warning>)> {
    let eval = sys.evaluator()?;
    let mut best = 0.0f64;
    let mut warnings = Vec::new();
    let mut last_err = None;
    for &w in grid.omegas() {
        match eval.eval(c64::new(0.0, w)) {
            Ok(g) => best = best.max(singular_values_c(g.as_ref())[0]),
            Err(e @ Error::SingularPencil { .. }) => {
                warnings.push(Warning::SkippedFrequency { omega: w });
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    if warnings.len() == grid.len() {
        return Err(last_err.expect("at least one point failed"));
    }
    Ok((best, warnings))
}

/// Sampled `max‖G − G_r‖ / max‖G‖` on one grid (an approximate relative H∞ error).
pub fn relative_hinf_sampled(full: &StateSpaceSystem, reduced: &StateSpaceSystem, grid: &FrequencyGrid) -> Result<f64> {
    if full.m() != reduced.m() || full.p() != reduced.p() {
        return Err(Error::DimensionMismatch("full and reduced systems have different port counts".into()));
    }
    let ef = full.evaluator()?;
    let er = reduced.evaluator()?;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    let mut used = 0;
    for &w in grid.omegas() {
        let s = c64::new(0.0, w);
        let (g, gr) = match (ef.eval(s), er.eval(s)) {
            (Ok(g), Ok(gr)) => (g, gr),
            (Err(Error::SingularPencil { .. }), _) | (_, Err(Error::SingularPencil { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        used += 1;
        den = den.max(singular_values_c(g.as_ref())[0]);
        num = num.max(singular_values_c((&g - &gr).as_ref())[0]);
    }
    if used == 0 {
        return Err(Error::SingularPencil { re: 0.0, im: grid.omegas()[0], index: None });
    }
    Ok(num / den)
}

/// Gain and unwrapped per-channel phase along a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseTable {
    pub omegas: Vec<f64>,
    /// `σ_max(G(iω))`.
    pub sigma: Vec<f64>,
    /// `phase[i * m + j][k]` is the unwrapped phase of `G_ij(iω_k)` in radians.
    pub phase: Vec<Vec<f64>>,
    pub outputs: usize,
    pub inputs: usize,
}

impl ResponseTable {
    pub fn channel_phase(&self, i: usize, j: usize) -> &[f64] {
        &self.phase[i * self.inputs + j]
    }
}

/// Adds multiples of 2π so that adjacent samples differ by at most π. NaN samples are
/// passed through and skipped.
pub fn unwrap_phase(raw: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(raw.len());
    let mut offset = 0.0f64;
    let mut prev: Option<f64> = None;
    for &p in raw {
        if p.is_nan() {
            out.push(p);
            continue;
        }
        if let Some(q) = prev {
            let d = p + offset - q;
            offset -= 2.0 * PI * (d / (2.0 * PI)).round();
        }
        out.push(p + offset);
        prev = Some(p + offset);
    }
    out
}

/// Rows at frequencies where the pencil is singular are NaN; fails only if every point is.
pub fn frequency_response(sys: &StateSpaceSystem, grid: &FrequencyGrid) -> Result<ResponseTable> {
    let eval = sys.evaluator()?;
    let (p, m) = (sys.p(), sys.m());
    let mut sigma = Vec::with_capacity(grid.len());
    let mut raw = alloc::vec![Vec::with_capacity(grid.len()); p * m];
    let mut last_err = None;
    for &w in grid.omegas() {
        match eval.eval(c64::new(0.0, w)) {
            Ok(g) => {
                sigma.push(singular_values_c(g.as_ref())[0]);
                for i in 0..p {
                    for j in 0..m {
                        raw[i * m + j].push(g[(i, j)].arg());
                    }
                }
            }
            Err(e @ Error::SingularPencil { .. }) => {
                sigma.push(f64::NAN);
                raw.iter_mut().for_each(|r| r.push(f64::NAN));
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    if sigma.iter().all(|s| s.is_nan()) {
        if let Some(e) = last_err {
            return Err(e);
        }
    }
    let phase = raw.iter().map(|r| unwrap_phase(r)).collect();
    Ok(ResponseTable { omegas: grid.omegas().to_vec(), sigma, phase, outputs: p, inputs: m })
}
