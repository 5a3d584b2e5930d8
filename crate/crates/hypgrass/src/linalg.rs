//! Small numerical kernels: one-sided Jacobi SVD, deterministic sampling,
//! Richardson extrapolation.
//!
//! The Jacobi SVD is used for every principal-angle computation. Unlike a
//! bidiagonalization SVD it delivers high *relative* accuracy for the small
//! singular values of column-graded matrices, which is exactly the shape the
//! pairing matrix takes when one point sits far out along a ray.

use nalgebra::{DMatrix, DVector};
use rand_core::RngCore;

/// Thin SVD of a square matrix by one-sided Jacobi rotations on columns.
///
/// Returns `(u, sigma, v)` with `c = u * diag(sigma) * v^T`, singular values
/// sorted non-increasing, and a first-significant-entry-positive sign
/// convention on the columns of `u` (compensated in `v`).
pub fn jacobi_svd(c: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let n = c.ncols();
    assert_eq!(c.nrows(), n, "jacobi_svd expects a square matrix");
    let mut a = c.clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let ci = a.column(i);
                let cj = a.column(j);
                let app: f64 = ci.dot(&ci);
                let aqq: f64 = cj.dot(&cj);
                let apq: f64 = ci.dot(&cj);
                // Norms are multiplied after the square roots: the product of
                // the squared norms overflows for strongly graded columns.
                if apq.abs() <= 1e-15 * app.sqrt() * aqq.sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                // Classic two-by-two symmetric Schur rotation.
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for r in 0..n {
                    let x = a[(r, i)];
                    let y = a[(r, j)];
                    a[(r, i)] = cs * x - sn * y;
                    a[(r, j)] = sn * x + cs * y;
                }
                for r in 0..n {
                    let x = v[(r, i)];
                    let y = v[(r, j)];
                    v[(r, i)] = cs * x - sn * y;
                    v[(r, j)] = sn * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort non-increasing.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|k| a.column(k).norm()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap().then(x.cmp(&y)));

    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut vs = DMatrix::<f64>::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (out, &k) in order.iter().enumerate() {
        let s = norms[k];
        sigma.push(s);
        if s > 0.0 {
            let col = a.column(k) / s;
            u.set_column(out, &col);
        } else {
            u[(out.min(n - 1), out)] = 1.0;
        }
        vs.set_column(out, &v.column(k));
    }

    // Deterministic sign convention on the left vectors.
    for k in 0..n {
        if column_needs_flip(&u.column(k).into_owned()) {
            for r in 0..n {
                u[(r, k)] = -u[(r, k)];
                vs[(r, k)] = -vs[(r, k)];
            }
        }
    }
    (u, sigma, vs)
}

/// True when the first significant entry of the column is negative.
pub fn column_needs_flip(col: &DVector<f64>) -> bool {
    let max = col.amax();
    if max == 0.0 {
        return false;
    }
    let thresh = 1e-9 * max;
    for &x in col.iter() {
        if x.abs() > thresh {
            return x < 0.0;
        }
    }
    false
}

/// Flip the sign of matrix column `k` in place when the convention demands it.
pub fn sign_fix_column(m: &mut DMatrix<f64>, k: usize) {
    if column_needs_flip(&m.column(k).into_owned()) {
        for r in 0..m.nrows() {
            m[(r, k)] = -m[(r, k)];
        }
    }
}

/// Uniform sample in (0, 1) from a raw 64-bit draw.
fn unit_f64(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Standard normal via Box-Muller. Kept in-house so fixed seeds reproduce
/// byte-identical streams regardless of distribution-crate internals.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = unit_f64(rng);
    let u2 = unit_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Gaussian matrix filled column-major, deterministic in the stream.
pub fn normal_matrix(rng: &mut impl RngCore, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = standard_normal(rng);
        }
    }
    m
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian with the R-diagonal
/// sign fix.
pub fn random_orthogonal(rng: &mut impl RngCore, n: usize) -> DMatrix<f64> {
    let g = normal_matrix(rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Richardson/Neville extrapolation of `f(t) -> f(inf)` from samples at
/// increasing `t`, assuming a power series in `1/t`.
///
/// Returns `(limit, last_delta)` where `last_delta` is the change produced by
/// the final tableau column, a convergence diagnostic.
pub fn extrapolate_in_inverse_t(ts: &[f64], fs: &[f64]) -> (f64, f64) {
    assert_eq!(ts.len(), fs.len());
    let n = ts.len();
    assert!(n >= 1);
    if n == 1 {
        return (fs[0], f64::INFINITY);
    }
    let hs: Vec<f64> = ts.iter().map(|&t| 1.0 / t).collect();
    let mut tableau = fs.to_vec();
    let mut prev_corner = tableau[n - 1];
    let mut last_delta = f64::INFINITY;
    for level in 1..n {
        for i in (level..n).rev() {
            let h_lo = hs[i];
            let h_hi = hs[i - level];
            tableau[i] = (h_hi * tableau[i] - h_lo * tableau[i - 1]) / (h_hi - h_lo);
        }
        let corner = tableau[n - 1];
        last_delta = (corner - prev_corner).abs();
        prev_corner = corner;
    }
    (prev_corner, last_delta)
}
