//! Benchmark generators: the mass-spring-damper chain and the LC ladder network.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use crate::linalg::Matrix;
use crate::system::{PortHamiltonianSystem, build_ph};
use crate::{Error, Result};

/// Parameters of the mass-spring-damper chain; vectors have `n/2` entries.
///
/// Spring `k_i` couples mass `i` to mass `i+1`; the last spring ties the final mass to the wall.
#[derive(Clone, Debug, PartialEq)]
pub struct MsdParams {
    pub n: usize,
    pub masses: Vec<f64>,
    pub stiffness: Vec<f64>,
    pub damping: Vec<f64>,
}

impl MsdParams {
    pub fn uniform(n: usize, mass: f64, stiffness: f64, damping: f64) -> Self {
        let h = n / 2;
        Self { n, masses: vec![mass; h], stiffness: vec![stiffness; h], damping: vec![damping; h] }
    }

    /// `m_i = k_i = 4`, `c_i = 1`.
    pub fn benchmark(n: usize) -> Self {
        Self::uniform(n, 4.0, 4.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(Error::BadParams(format!("MSD order must be even and >= 2, got {}", self.n)));
        }
        let h = self.n / 2;
        for (name, v) in [("masses", &self.masses), ("stiffness", &self.stiffness), ("damping", &self.damping)] {
            if v.len() != h {
                return Err(Error::BadParams(format!("{name} has {} entries, expected {h}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::BadParams(format!("{name} must be finite")));
            }
        }
        if self.masses.iter().chain(&self.stiffness).any(|&x| x <= 0.0) {
            return Err(Error::BadParams("masses and stiffnesses must be positive".into()));
        }
        if self.damping.iter().any(|&x| x < 0.0) {
            return Err(Error::BadParams("dampings must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Mass-spring-damper chain with forces on the first two masses (one mass: one input).
pub fn build_msd(p: &MsdParams) -> Result<PortHamiltonianSystem> {
    p.validate()?;
    let n = p.n;
    let h = n / 2;
    let mut tj = Vec::with_capacity(2 * h);
    let mut tr = Vec::with_capacity(h);
    let mut tq = Vec::with_capacity(5 * h);
    for i in 0..h {
        let (q, mom) = (2 * i, 2 * i + 1);
        tj.push((q, mom, 1.0));
        tj.push((mom, q, -1.0));
        tr.push((mom, mom, p.damping[i]));
        let left = if i == 0 { 0.0 } else { p.stiffness[i - 1] };
        tq.push((q, q, left + p.stiffness[i]));
        tq.push((mom, mom, 1.0 / p.masses[i]));
        if i + 1 < h {
            tq.push((q, q + 2, -p.stiffness[i]));
            tq.push((q + 2, q, -p.stiffness[i]));
        }
    }
    let m = h.min(2);
    let mut b = Mat::<f64>::zeros(n, m);
    for k in 0..m {
        b[(2 * k + 1, k)] = 1.0;
    }
    build_ph(
        Matrix::from_triplets(n, n, &tj),
        Matrix::from_triplets(n, n, &tr),
        Matrix::from_triplets(n, n, &tq),
        b,
    )
}

/// Parameters of the ladder network: `n/2` capacitors and inductors, `n/2 + 1` resistors.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderParams {
    pub n: usize,
    pub capacitances: Vec<f64>,
    pub inductances: Vec<f64>,
    pub resistances: Vec<f64>,
}

impl LadderParams {
    pub fn uniform(n: usize, c: f64, l: f64, r: f64, r_last: f64) -> Self {
        let h = n / 2;
        let mut resistances = vec![r; h];
        resistances.push(r_last);
        Self { n, capacitances: vec![c; h], inductances: vec![l; h], resistances }
    }

    /// `C_i = L_i = 0.1`, `R_i = 3` for `i ≤ n/2`, terminal resistor 1.
    pub fn benchmark(n: usize) -> Self {
        Self::uniform(n, 0.1, 0.1, 3.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(Error::BadParams(format!("ladder order must be even and >= 4, got {}", self.n)));
        }
        let h = self.n / 2;
        if self.capacitances.len() != h || self.inductances.len() != h || self.resistances.len() != h + 1 {
            return Err(Error::BadParams(format!(
                "ladder of order {} needs {h} capacitances, {h} inductances and {} resistances",
                self.n,
                h + 1
            )));
        }
        let all = self.capacitances.iter().chain(&self.inductances).chain(&self.resistances);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::BadParams("ladder parameters must be finite".into()));
        }
        if self.capacitances.iter().chain(&self.inductances).any(|&x| x <= 0.0) {
            return Err(Error::BadParams("capacitances and inductances must be positive".into()));
        }
        if self.resistances.iter().any(|&x| x < 0.0) {
            return Err(Error::BadParams("resistances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Ladder network driven by a current on the left and a voltage on the right.
pub fn build_ladder(p: &LadderParams) -> Result<PortHamiltonianSystem> {
    p.validate()?;
    let n = p.n;
    let h = n / 2;
    let mut tj = Vec::with_capacity(2 * n);
    let mut tr = Vec::with_capacity(h);
    let mut tq = Vec::with_capacity(n);
    for k in 0..h {
        let (charge, flux) = (2 * k, 2 * k + 1);
        tq.push((charge, charge, 1.0 / p.capacitances[k]));
        tq.push((flux, flux, 1.0 / p.inductances[k]));
        let last = k + 1 == h;
        let s = if last { 1.0 } else { -1.0 };
        tj.push((charge, flux, s));
        tj.push((flux, charge, -s));
        if !last {
            tj.push((flux, charge + 2, -1.0));
            tj.push((charge + 2, flux, 1.0));
        }
        let rk = if last { p.resistances[k] + p.resistances[k + 1] } else { p.resistances[k] };
        tr.push((flux, flux, rk));
    }
    let mut b = Mat::<f64>::zeros(n, 2);
    b[(0, 0)] = 1.0;
    b[(n - 1, 1)] = 1.0;
    build_ph(
        Matrix::from_triplets(n, n, &tj),
        Matrix::from_triplets(n, n, &tr),
        Matrix::from_triplets(n, n, &tq),
        b,
    )
}
