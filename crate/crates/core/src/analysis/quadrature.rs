use alloc::collections::BinaryHeap;
use core::cmp::Ordering;
use core::f64::consts::FRAC_PI_2;

use faer::c64;
use num_traits::Float;

use crate::linalg::norm_fro_c;
use crate::system::{StateSpaceSystem, TransferEvaluator};
use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_PANELS: usize = 4000;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn integrand(eval: &TransferEvaluator<'_>, theta: f64) -> Result<f64> {
    let t = theta.tan();
    let g = eval.eval(c64::new(0.0, t))?;
    let f = norm_fro_c(g.as_ref());
    Ok(f * f * (1.0 + t * t))
}

fn kronrod(eval: &TransferEvaluator<'_>, a: f64, b: f64) -> Result<Panel> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = integrand(eval, c)?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = integrand(eval, c - x)? + integrand(eval, c + x)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok(Panel { a, b, value: k * h, error: ((k - g) * h).abs() })
}

/// H2 norm by adaptive Gauss-Kronrod quadrature of `(1/π)∫₀^∞ ‖G(iω)‖²_F dω`.
///
/// The half line is mapped to `(0, π/2)` by `ω = tan θ`; refinement stops once the
/// estimated error of the squared norm falls below `rel_tol` relative.
pub fn h2_norm_quadrature(sys: &StateSpaceSystem, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return Err(Error::BadParams("quadrature tolerance must be positive".into()));
    }
    let eval = sys.evaluator()?;
    let mut heap = BinaryHeap::new();
    let pieces = 32;
    for k in 0..pieces {
        let a = FRAC_PI_2 * k as f64 / pieces as f64;
        let b = FRAC_PI_2 * (k + 1) as f64 / pieces as f64;
        heap.push(kronrod(&eval, a, b)?);
    }
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let err: f64 = heap.iter().map(|p| p.error).sum();
        if err <= rel_tol * total.abs() || heap.len() >= MAX_PANELS {
            return Ok((total.max(0.0) / core::f64::consts::PI).sqrt());
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(kronrod(&eval, worst.a, mid)?);
        heap.push(kronrod(&eval, mid, worst.b)?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use faer::Mat;

    #[test]
    fn first_order_system() {
        let g = StateSpaceSystem::new(
            None,
            Matrix::Dense(Mat::from_fn(1, 1, |_, _| -1.0)),
            Mat::from_fn(1, 1, |_, _| 1.0),
            Mat::from_fn(1, 1, |_, _| 1.0),
        )
        .unwrap();
        assert!((h2_norm_quadrature(&g, 1e-10).unwrap() - 0.5f64.sqrt()).abs() < 1e-8);
    }
}
