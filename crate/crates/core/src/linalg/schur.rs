//! Complex Schur decomposition and a Bartels-Stewart Lyapunov solver.

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::evd::hessenberg;
use faer::{Conj, Mat, MatRef, Par, c64};
use num_traits::Float;

use super::{real_part, to_complex};
use crate::{Error, Result};

/// `A = Z T Zᴴ` with `T` upper triangular and `Z` unitary.
#[derive(Clone, Debug)]
pub struct ComplexSchur {
    pub t: Mat<c64>,
    pub z: Mat<c64>,
}

impl ComplexSchur {
    pub fn eigenvalues(&self) -> alloc::vec::Vec<c64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }
}

fn abs1(z: c64) -> f64 {
    z.re.abs() + z.im.abs()
}

fn hessenberg_form(a: MatRef<'_, c64>) -> (Mat<c64>, Mat<c64>) {
    let n = a.nrows();
    let par = Par::Seq;
    let mut h = a.to_owned();
    let mut z = Mat::<c64>::identity(n, n);
    if n <= 2 {
        return (h, z);
    }
    let bs = faer::linalg::qr::no_pivoting::factor::recommended_block_size::<c64>(n - 1, n - 1);
    let mut householder = Mat::<c64>::zeros(bs, n - 1);
    let req = StackReq::any_of(&[
        hessenberg::hessenberg_in_place_scratch::<c64>(n, bs, par, Default::default()),
        faer::linalg::householder::apply_block_householder_sequence_on_the_right_in_place_scratch::<c64>(
            n - 1,
            bs,
            n - 1,
        ),
    ]);
    let mut buf = MemBuffer::new(req);
    let stack = MemStack::new(&mut buf);
    hessenberg::hessenberg_in_place(h.as_mut(), householder.as_mut(), par, stack, Default::default());
    faer::linalg::householder::apply_block_householder_sequence_on_the_right_in_place_with_conj(
        h.as_ref().submatrix(1, 0, n - 1, n - 1),
        householder.as_ref(),
        Conj::No,
        z.as_mut().submatrix_mut(1, 1, n - 1, n - 1),
        par,
        stack,
    );
    for j in 0..n {
        for i in j + 2..n {
            h[(i, j)] = c64::new(0.0, 0.0);
        }
    }
    (h, z)
}

/// Eigenvalue of the trailing 2×2 block closest to its last diagonal entry.
fn wilkinson_shift(a: c64, b: c64, c: c64, d: c64) -> c64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let (l1, l2) = (mid + disc, mid - disc);
    if (l1 - d).norm() <= (l2 - d).norm() { l1 } else { l2 }
}

/// Complex Schur form by Hessenberg reduction and single-shift implicit QR.
pub fn complex_schur(a: MatRef<'_, c64>) -> Result<ComplexSchur> {
    let n = a.nrows();
    let (mut h, mut z) = hessenberg_form(a);
    let eps = f64::EPSILON;
    let small = f64::MIN_POSITIVE * (n.max(1) as f64) / eps;
    let mut hi = n;
    let mut its = 0usize;
    let mut total = 0usize;
    let zero = c64::new(0.0, 0.0);
    while hi > 1 {
        let last = hi - 1;
        let mut l = last;
        while l > 0 {
            let sub = abs1(h[(l, l - 1)]);
            let tst = abs1(h[(l - 1, l - 1)]) + abs1(h[(l, l)]);
            if sub <= small || sub <= eps * tst {
                h[(l, l - 1)] = zero;
                break;
            }
            l -= 1;
        }
        if l == last {
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > 30 * n.max(10) {
            return Err(Error::EigenNoConvergence);
        }
        let mu = if its % 10 == 0 {
            h[(last, last)] + c64::new(0.75 * abs1(h[(last, last - 1)]), 0.0)
        } else {
            wilkinson_shift(h[(last - 1, last - 1)], h[(last - 1, last)], h[(last, last - 1)], h[(last, last)])
        };
        for k in l..last {
            let (x, y) = if k == l { (h[(l, l)] - mu, h[(l + 1, l)]) } else { (h[(k, k - 1)], h[(k + 1, k - 1)]) };
            let ax = x.norm();
            let nrm = (ax * ax + y.norm_sqr()).sqrt();
            if nrm == 0.0 {
                continue;
            }
            let (c, s) = if ax == 0.0 { (0.0, c64::new(1.0, 0.0)) } else { (ax / nrm, (x / ax) * y.conj() / nrm) };
            let start = if k > l { k - 1 } else { k };
            for j in start..n {
                let (p, q) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = p * c + s * q;
                h[(k + 1, j)] = q * c - s.conj() * p;
            }
            if k > l {
                h[(k + 1, k - 1)] = zero;
            }
            let end = (k + 2).min(last);
            for i in 0..=end {
                let (p, q) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = p * c + q * s.conj();
                h[(i, k + 1)] = q * c - p * s;
            }
            for i in 0..n {
                let (p, q) = (z[(i, k)], z[(i, k + 1)]);
                z[(i, k)] = p * c + q * s.conj();
                z[(i, k + 1)] = q * c - p * s;
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = zero;
        }
    }
    Ok(ComplexSchur { t: h, z })
}

/// Solves `A P + P Aᵀ + M = 0` for real `A` (stable) and symmetric `M`.
///
/// `ceiling` bounds the dimension accepted by this dense solver.
pub fn lyapunov(a: MatRef<'_, f64>, m: MatRef<'_, f64>, ceiling: usize) -> Result<Mat<f64>> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(alloc::format!(
            "lyapunov: A is {}x{}, M is {}x{}",
            n,
            a.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    if n > ceiling {
        return Err(Error::SizeLimitExceeded { n, limit: ceiling });
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let schur = complex_schur(to_complex(a).as_ref())?;
    let t = &schur.t;
    let z = &schur.z;
    let abscissa = (0..n).map(|i| t[(i, i)].re).fold(f64::NEG_INFINITY, f64::max);
    let scale = a.norm_l2().max(1.0);
    if !(abscissa < -1e-13 * scale) {
        return Err(Error::UnstableMatrix { abscissa });
    }
    // Zᴴ M Z
    let c = z.adjoint() * to_complex(m) * z;
    let mut y = Mat::<c64>::zeros(n, n);
    let mut rhs = alloc::vec![c64::new(0.0, 0.0); n];
    for j in (0..n).rev() {
        for i in 0..n {
            rhs[i] = -c[(i, j)];
        }
        for k in j + 1..n {
            let tjk = t[(j, k)].conj();
            if tjk == c64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..n {
                rhs[i] -= tjk * y[(i, k)];
            }
        }
        let shift = t[(j, j)].conj();
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in i + 1..n {
                s -= t[(i, k)] * y[(k, j)];
            }
            y[(i, j)] = s / (t[(i, i)] + shift);
        }
    }
    let p = real_part((z * &y * z.adjoint()).as_ref());
    Ok(super::symmetrize(p.as_ref()))
}

/// Factor `L` with `L Lᴴ = P` for `A P + P Aᵀ + B Bᵀ = 0`, computed without forming `P`.
///
/// Hammarling's method on the complex Schur form; `L = Z U` with `U` upper triangular.
/// Quantities such as `‖C L‖_F` then avoid the cancellation incurred by `trace(C P Cᵀ)`.
pub fn lyapunov_factor(a: MatRef<'_, f64>, b: MatRef<'_, f64>, ceiling: usize) -> Result<Mat<c64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(alloc::format!(
            "lyapunov_factor: A is {}x{}, B is {}x{}",
            n,
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n > ceiling {
        return Err(Error::SizeLimitExceeded { n, limit: ceiling });
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let schur = complex_schur(to_complex(a).as_ref())?;
    let t = &schur.t;
    let abscissa = (0..n).map(|i| t[(i, i)].re).fold(f64::NEG_INFINITY, f64::max);
    if !(abscissa < -1e-13 * a.norm_l2().max(1.0)) {
        return Err(Error::UnstableMatrix { abscissa });
    }
    let m = b.ncols();
    let zero = c64::new(0.0, 0.0);
    let mut g = schur.z.adjoint() * to_complex(b);
    let mut u = Mat::<c64>::zeros(n, n);
    if m == 0 {
        return Ok(u);
    }
    let last = m - 1;
    let mut v = alloc::vec![zero; m];
    let mut rhs = alloc::vec![zero; n];
    for k in (0..n).rev() {
        // Unitary reflection from the right leaves row k as (0, ..., 0, β).
        let norm = (0..m).map(|j| g[(k, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            let xm = g[(k, last)].conj();
            let phase = if xm.norm() > 0.0 { xm / xm.norm() } else { c64::new(1.0, 0.0) };
            let alpha = -phase * norm;
            for j in 0..m {
                v[j] = g[(k, j)].conj();
            }
            v[last] -= alpha;
            let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if vv > 0.0 {
                for i in 0..=k {
                    let mut dot = zero;
                    for j in 0..m {
                        dot += g[(i, j)] * v[j];
                    }
                    let f = dot * (2.0 / vv);
                    for j in 0..m {
                        g[(i, j)] -= f * v[j].conj();
                    }
                }
            }
            for j in 0..last {
                g[(k, j)] = zero;
            }
        }
        let beta = g[(k, last)];
        let tau = t[(k, k)];
        let nu = beta.norm() / (-2.0 * tau.re).sqrt();
        u[(k, k)] = c64::new(nu, 0.0);
        if nu == 0.0 || k == 0 {
            continue;
        }
        // (T₁ + τ̄ I) u = −(b β̄ + t ν²)/ν
        for i in 0..k {
            rhs[i] = -(g[(i, last)] * beta.conj() + t[(i, k)] * (nu * nu)) / nu;
        }
        let shift = tau.conj();
        for i in (0..k).rev() {
            let mut s = rhs[i];
            for j in i + 1..k {
                s -= t[(i, j)] * u[(j, k)];
            }
            u[(i, k)] = s / (t[(i, i)] + shift);
        }
        let ratio = beta / nu;
        for i in 0..k {
            g[(i, last)] -= ratio * u[(i, k)];
        }
    }
    Ok(&schur.z * &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm_fro_c, rel_err};

    fn pseudo_random(n: usize, seed: u64) -> Mat<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Mat::from_fn(n, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn schur_reconstructs_input() {
        for &n in &[1usize, 2, 3, 7, 25, 60] {
            let a = to_complex(pseudo_random(n, n as u64).as_ref());
            let s = complex_schur(a.as_ref()).unwrap();
            let back = &s.z * &s.t * s.z.adjoint();
            let diff = &back - &a;
            assert!(norm_fro_c(diff.as_ref()) < 1e-12 * norm_fro_c(a.as_ref()).max(1.0), "n = {n}");
            let orth = s.z.adjoint() * &s.z - Mat::<c64>::identity(n, n);
            assert!(norm_fro_c(orth.as_ref()) < 1e-12);
        }
    }

    #[test]
    fn schur_handles_rotation_block() {
        let a = Mat::from_fn(2, 2, |i, j| [[0.0, 1.0], [-1.0, 0.0]][i][j]);
        let s = complex_schur(to_complex(a.as_ref()).as_ref()).unwrap();
        let mut ev = s.eigenvalues();
        ev.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap());
        assert!((ev[0] - c64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - c64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn lyapunov_identity_case() {
        let a = Mat::<f64>::from_fn(4, 4, |i, j| if i == j { -1.0 } else { 0.0 });
        let m = Mat::<f64>::identity(4, 4);
        let p = lyapunov(a.as_ref(), m.as_ref(), 2000).unwrap();
        let half = Mat::<f64>::from_fn(4, 4, |i, j| if i == j { 0.5 } else { 0.0 });
        assert!(rel_err(p.as_ref(), half.as_ref()) < 1e-14);
    }

    #[test]
    fn factor_reproduces_dense_solution() {
        for &(n, m) in &[(1usize, 1usize), (6, 2), (30, 3), (40, 1)] {
            let mut a = pseudo_random(n, 7 + n as u64);
            for i in 0..n {
                a[(i, i)] -= 0.6 * n as f64;
            }
            let b = Mat::from_fn(n, m, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
            let p = lyapunov(a.as_ref(), (&b * b.transpose()).as_ref(), 2000).unwrap();
            let l = lyapunov_factor(a.as_ref(), b.as_ref(), 2000).unwrap();
            let llh = &l * l.adjoint();
            let diff = &llh - to_complex(p.as_ref());
            assert!(norm_fro_c(diff.as_ref()) < 1e-12 * p.norm_l2(), "n = {n}");
        }
    }

    #[test]
    fn lyapunov_rejects_unstable_and_oversize() {
        let a = Mat::<f64>::from_fn(2, 2, |i, j| if i == j { [0.1, -1.0][i] } else { 0.0 });
        let m = Mat::<f64>::identity(2, 2);
        assert!(matches!(lyapunov(a.as_ref(), m.as_ref(), 2000), Err(Error::UnstableMatrix { .. })));
        assert!(matches!(lyapunov(a.as_ref(), m.as_ref(), 1), Err(Error::SizeLimitExceeded { .. })));
    }
}
