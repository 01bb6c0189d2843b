use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::SparseMat;

/// Envelope (skyline) Cholesky of a symmetric sparse matrix plus `shift·I`.
///
/// Returns `false` as soon as a pivot falls to `pivot_floor` or below.
/// Only the lower triangle's envelope is referenced, so fill stays inside the profile.
pub fn envelope_cholesky_ok(a: &SparseMat, shift: f64, pivot_floor: f64) -> bool {
    let n = a.nrows();
    let first = a.envelope_first();
    // row i of L is stored densely for columns first[i]..=i
    let mut start = vec![0usize; n + 1];
    for i in 0..n {
        start[i + 1] = start[i] + (i - first[i] + 1);
    }
    let mut l = vec![0.0f64; start[n]];
    for (i, j, v) in a.iter() {
        if j <= i {
            l[start[i] + (j - first[i])] += v;
        }
    }
    for i in 0..n {
        l[start[i] + (i - first[i])] += shift;
    }
    let row = |l: &Vec<f64>, i: usize, j: usize| -> f64 {
        if j < first[i] { 0.0 } else { l[start[i] + (j - first[i])] }
    };
    for i in 0..n {
        for j in first[i]..i {
            let lo = first[i].max(first[j]);
            let mut s = l[start[i] + (j - first[i])];
            for k in lo..j {
                s -= row(&l, i, k) * row(&l, j, k);
            }
            let d = l[start[j] + (j - first[j])];
            l[start[i] + (j - first[i])] = s / d;
        }
        let mut d = l[start[i] + (i - first[i])];
        for k in first[i]..i {
            let v = l[start[i] + (k - first[i])];
            d -= v * v;
        }
        if !(d > pivot_floor) {
            return false;
        }
        l[start[i] + (i - first[i])] = d.sqrt();
    }
    true
}
