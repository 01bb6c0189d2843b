use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;
use num_traits::Float;

use crate::linalg::Matrix;
use crate::system::{PortHamiltonianSystem, StateSpaceSystem};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SignalKind {
    /// `e^{−αt} sin(βt)`.
    DecayingSinusoid { alpha: f64, beta: f64 },
    /// `+1` on the first half of each period, `−1` on the second.
    SquareWave { period: f64 },
    Zero,
}

impl SignalKind {
    pub fn decaying_default() -> Self {
        SignalKind::DecayingSinusoid { alpha: 0.05, beta: 5.0 }
    }

    pub fn square_default() -> Self {
        SignalKind::SquareWave { period: 0.2 * core::f64::consts::PI }
    }
}

/// A scalar time function applied to a set of input channels.
#[derive(Clone, Debug, PartialEq)]
pub struct InputSignal {
    kind: SignalKind,
    channels: Option<Vec<usize>>,
}

pub fn make_signal(kind: SignalKind) -> Result<InputSignal> {
    match kind {
        SignalKind::DecayingSinusoid { alpha, beta } => {
            if !(alpha.is_finite() && alpha >= 0.0 && beta.is_finite() && beta > 0.0) {
                return Err(Error::BadParams(format!("decaying sinusoid needs rate >= 0 and frequency > 0, got {alpha}, {beta}")));
            }
        }
        SignalKind::SquareWave { period } => {
            if !(period.is_finite() && period > 0.0) {
                return Err(Error::BadParams(format!("square wave period must be positive, got {period}")));
            }
        }
        SignalKind::Zero => {}
    }
    Ok(InputSignal { kind, channels: None })
}

impl InputSignal {
    /// Restricts the signal to the given zero-based input channels.
    pub fn on_channels(mut self, channels: Vec<usize>) -> Self {
        self.channels = Some(channels);
        self
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            SignalKind::DecayingSinusoid { alpha, beta } => (-alpha * t).exp() * (beta * t).sin(),
            SignalKind::SquareWave { period } => {
                let phase = (t / period).rem_euclid(1.0);
                if phase < 0.5 { 1.0 } else { -1.0 }
            }
            SignalKind::Zero => 0.0,
        }
    }

    /// Value at `t` for smooth signals; piecewise-constant signals are read at `mid`.
    fn value_in_step(&self, t: f64, mid: f64) -> f64 {
        match self.kind {
            SignalKind::SquareWave { .. } => self.value(mid),
            _ => self.value(t),
        }
    }

    fn fill(&self, v: f64, u: &mut [f64]) {
        match &self.channels {
            None => u.iter_mut().for_each(|x| *x = v),
            Some(ch) => {
                u.iter_mut().for_each(|x| *x = 0.0);
                for &c in ch {
                    if c < u.len() {
                        u[c] = v;
                    }
                }
            }
        }
    }

    /// Vector input at time `t`.
    pub fn eval(&self, t: f64, u: &mut [f64]) {
        self.fill(self.value(t), u);
    }

    /// Discontinuities in `(0, t_end)`.
    pub fn breakpoints(&self, t_end: f64) -> Vec<f64> {
        match self.kind {
            SignalKind::SquareWave { period } => {
                let half = 0.5 * period;
                (1..).map(|k| k as f64 * half).take_while(|&t| t < t_end).collect()
            }
            _ => Vec::new(),
        }
    }

    fn check_channels(&self, m: usize) -> Result<()> {
        if let Some(ch) = &self.channels {
            if let Some(&c) = ch.iter().find(|&&c| c >= m) {
                return Err(Error::BadParams(format!("input channel {c} out of range for m = {m}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of output samples including `t = 0`.
    pub samples: usize,
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { rtol: 1e-6, atol: 1e-9, samples: 2001, max_steps: 10_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `p × len`.
    pub outputs: Mat<f64>,
    /// Final state.
    pub final_state: Vec<f64>,
    pub stats: SolverStats,
}

impl Trajectory {
    /// `max_k |y_i(t_k) − other_i(t_k)|` on a shared time grid.
    pub fn max_abs_diff(&self, other: &Trajectory, channel: usize) -> f64 {
        assert_eq!(self.times.len(), other.times.len());
        (0..self.times.len())
            .map(|k| (self.outputs[(channel, k)] - other.outputs[(channel, k)]).abs())
            .fold(0.0, f64::max)
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Right-hand side `f(t, mid, x, dx)`; `mid` is the midpoint of the current step.
trait Rhs {
    fn dim(&self) -> usize;
    fn eval(&mut self, t: f64, mid: f64, x: &[f64], dx: &mut [f64]);
}

/// Adaptive DOPRI5 that lands exactly on every sample time and breakpoint.
fn dopri5<F: Rhs>(
    f: &mut F,
    x0: Vec<f64>,
    stops: &[f64],
    opts: &SimOptions,
    mut record: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolverStats)> {
    let n = f.dim();
    let mut x = x0;
    let mut stats = SolverStats::default();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let t_end = *stops.last().expect("at least one stop");
    let mut t = 0.0;
    let mut h = (t_end * 1e-3).min(stops.get(1).copied().unwrap_or(t_end));
    record(0, &x);
    let mut next = 1;
    while next < stops.len() {
        let target = stops[next];
        let mut step = h.min(target - t);
        let last = step >= target - t;
        if last {
            step = target - t;
        }
        if step <= 1e-14 * t_end.max(1.0) && !last {
            return Err(Error::StepSizeUnderflow { t });
        }
        let mid = t + 0.5 * step;
        f.eval(t, mid, &x, &mut k[0]);
        stats.evaluations += 1;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = x[i];
                for j in 0..s {
                    acc += step * A[s][j] * k[j][i];
                }
                tmp[i] = acc;
            }
            f.eval(t + C[s] * step, mid, &tmp, &mut k[s]);
            stats.evaluations += 1;
            if s == 6 {
                xn.copy_from_slice(&tmp);
            }
        }
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * k[s][i];
            }
            let sc = opts.atol + opts.rtol * x[i].abs().max(xn[i].abs());
            let r = step * e / sc;
            err += r * r;
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            if xn.iter().any(|v| !v.is_finite()) && step <= 1e-10 * t_end.max(1.0) {
                return Err(Error::NonFiniteState { t });
            }
            h = 0.1 * step;
            stats.rejected += 1;
            continue;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            stats.accepted += 1;
            if stats.accepted + stats.rejected > opts.max_steps {
                return Err(Error::StepSizeUnderflow { t });
            }
            t = if last { target } else { t + step };
            core::mem::swap(&mut x, &mut xn);
            if last {
                record(next, &x);
                next += 1;
                h = h.max(step * factor);
            } else {
                h = step * factor;
            }
        } else {
            stats.rejected += 1;
            h = step * factor.min(1.0);
        }
        if h < 1e-14 * t_end.max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
    }
    Ok((x, stats))
}

fn stop_times(t_end: f64, samples: usize, breakpoints: &[f64]) -> Vec<f64> {
    let mut stops: Vec<f64> = (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect();
    stops[samples - 1] = t_end;
    stops.extend_from_slice(breakpoints);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end);
    stops
}

fn check(t_end: f64, opts: &SimOptions) -> Result<()> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::BadParams(format!("simulation end time must be positive, got {t_end}")));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) || opts.samples < 2 {
        return Err(Error::BadParams("tolerances must be positive and at least two samples are needed".into()));
    }
    Ok(())
}

struct Linear<'a> {
    a: &'a Matrix,
    b: &'a Mat<f64>,
    input: &'a InputSignal,
    u: Vec<f64>,
}

impl Linear<'_> {
    fn field(&mut self, t: f64, mid: f64, x: &[f64], dx: &mut [f64]) {
        self.a.mul_vec(x, dx);
        let v = self.input.value_in_step(t, mid);
        self.input.fill(v, &mut self.u);
        for (j, &uj) in self.u.iter().enumerate() {
            if uj != 0.0 {
                for i in 0..dx.len() {
                    dx[i] += self.b[(i, j)] * uj;
                }
            }
        }
    }
}

impl Rhs for Linear<'_> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&mut self, t: f64, mid: f64, x: &[f64], dx: &mut [f64]) {
        self.field(t, mid, x, dx);
    }
}

fn outputs_at(c: &Mat<f64>, x: &[f64], col: usize, out: &mut Mat<f64>) {
    for i in 0..c.nrows() {
        out[(i, col)] = (0..x.len()).map(|j| c[(i, j)] * x[j]).sum();
    }
}

fn sample_times(t_end: f64, samples: usize) -> Vec<f64> {
    let mut times: Vec<f64> = (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect();
    times[samples - 1] = t_end;
    times
}

/// Simulates from the zero state (or `x0`) with an adaptive Dormand-Prince 5(4) pair.
///
/// Outputs are recorded on `opts.samples` equispaced times; input discontinuities
/// are hit exactly.
pub fn simulate(
    sys: &StateSpaceSystem,
    input: &InputSignal,
    t_end: f64,
    x0: Option<&[f64]>,
    opts: &SimOptions,
) -> Result<Trajectory> {
    check(t_end, opts)?;
    input.check_channels(sys.m())?;
    let std_sys = sys.to_standard()?;
    let n = std_sys.n();
    let x0 = init_state(x0, n)?;
    let b = std_sys.b().to_owned();
    let c = std_sys.c().to_owned();
    let mut rhs = Linear { a: std_sys.a(), b: &b, input, u: vec![0.0; sys.m()] };
    let stops = stop_times(t_end, opts.samples, &input.breakpoints(t_end));
    let times = sample_times(t_end, opts.samples);
    let mut outputs = Mat::<f64>::zeros(c.nrows(), times.len());
    let mut col = 0;
    let (final_state, stats) = dopri5(&mut rhs, x0, &stops, opts, |idx, x| {
        if col < times.len() && (stops[idx] - times[col]).abs() <= 1e-12 * t_end {
            outputs_at(&c, x, col, &mut outputs);
            col += 1;
        }
    })?;
    if outputs.col_iter().any(|v| v.iter().any(|y| !y.is_finite())) {
        return Err(Error::NonFiniteState { t: t_end });
    }
    Ok(Trajectory { times, outputs, final_state, stats })
}

fn init_state(x0: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    match x0 {
        Some(x) if x.len() != n => Err(Error::DimensionMismatch(format!("initial state has {} entries, n = {n}", x.len()))),
        Some(x) => Ok(x.to_vec()),
        None => Ok(vec![0.0; n]),
    }
}

/// Energy bookkeeping of a simulated port-Hamiltonian trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyAudit {
    /// `∫₀ᵀ uᵀy dt`.
    pub supplied: f64,
    /// `H(x(T)) − H(x(0))`.
    pub delta_h: f64,
    /// `max(max_t H, ∫|uᵀy| dt)`.
    pub energy_scale: f64,
}

impl EnergyAudit {
    /// `∫uᵀy dt − ΔH`; nonnegative for a passive system up to integration error.
    pub fn margin(&self) -> f64 {
        self.supplied - self.delta_h
    }

    /// `margin ≥ −10 · rtol · energy_scale`.
    pub fn passes(&self, rtol: f64) -> bool {
        self.margin() >= -10.0 * rtol * self.energy_scale
    }
}

struct Augmented<'a> {
    lin: Linear<'a>,
    n: usize,
    c: &'a Mat<f64>,
}

impl Rhs for Augmented<'_> {
    fn dim(&self) -> usize {
        self.n + 2
    }

    fn eval(&mut self, t: f64, mid: f64, x: &[f64], dx: &mut [f64]) {
        let n = self.n;
        self.lin.field(t, mid, &x[..n], &mut dx[..n]);
        let mut power = 0.0;
        for (j, &uj) in self.lin.u.iter().enumerate() {
            if uj != 0.0 {
                power += uj * (0..n).map(|i| self.c[(j, i)] * x[i]).sum::<f64>();
            }
        }
        dx[n] = power;
        dx[n + 1] = power.abs();
    }
}

/// Simulates a port-Hamiltonian system together with the supplied energy `∫uᵀy dt`.
pub fn simulate_ph(
    ph: &PortHamiltonianSystem,
    input: &InputSignal,
    t_end: f64,
    x0: Option<&[f64]>,
    opts: &SimOptions,
) -> Result<(Trajectory, EnergyAudit)> {
    check(t_end, opts)?;
    input.check_channels(ph.m())?;
    let n = ph.n();
    let mut x = init_state(x0, n)?;
    let h0 = ph.hamiltonian(&x);
    x.extend_from_slice(&[0.0, 0.0]);
    let a = ph.a();
    let b = ph.b().to_owned();
    let c = ph.c();
    let mut rhs = Augmented { lin: Linear { a: &a, b: &b, input, u: vec![0.0; ph.m()] }, n, c: &c };
    let stops = stop_times(t_end, opts.samples, &input.breakpoints(t_end));
    let times = sample_times(t_end, opts.samples);
    let mut outputs = Mat::<f64>::zeros(c.nrows(), times.len());
    let mut col = 0;
    let mut h_max = h0.abs();
    let (final_state, stats) = dopri5(&mut rhs, x, &stops, opts, |idx, x| {
        h_max = h_max.max(ph.hamiltonian(&x[..n]).abs());
        if col < times.len() && (stops[idx] - times[col]).abs() <= 1e-12 * t_end {
            outputs_at(&c, &x[..n], col, &mut outputs);
            col += 1;
        }
    })?;
    let supplied = final_state[n];
    let delta_h = ph.hamiltonian(&final_state[..n]) - h0;
    let energy_scale = h_max.max(final_state[n + 1]).max(f64::MIN_POSITIVE);
    let audit = EnergyAudit { supplied, delta_h, energy_scale };
    let traj = Trajectory { times, outputs, final_state: final_state[..n].to_vec(), stats };
    Ok((traj, audit))
}
