//! Singular values via one-sided Jacobi rotations.
//!
//! Accuracy over speed: the matrices this crate decomposes are activation
//! batches of at most a few thousand rows by a few hundred columns, where
//! plain Jacobi sweeps are more than fast enough and numerically robust.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// All singular values of `m`, non-negative and sorted descending.
/// Returns `min(rows, cols)` values.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Err(Error::InvalidArgument("singular_values: empty matrix".into()));
    }
    m.check_finite("singular_values input")?;

    // Work on whichever orientation puts the smaller dimension on rows, then
    // orthogonalize rows pairwise; singular values are the row norms.
    let mut w = if m.rows() <= m.cols() { m.clone() } else { m.transpose() };
    let k = w.rows();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let (alpha, beta, gamma) = {
                    let rp = w.row(p);
                    let rq = w.row(q);
                    (dot(rp, rp), dot(rq, rq), dot(rp, rq))
                };
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() || gamma.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..k).map(|i| dot(w.row(i), w.row(i)).sqrt()).collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sigma)
}

fn rotate_rows(w: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = w.cols();
    let data = w.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let va = *a;
        let vb = *b;
        *a = c * va - s * vb;
        *b = s * va + c * vb;
    }
}
