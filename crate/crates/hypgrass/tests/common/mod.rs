//! Shared test helpers: the greedy definitional angle oracle and input
//! generators. The oracle deliberately avoids the library's SVD path.
#![allow(dead_code)] // each test target uses its own subset

use hypgrass::kfields::KStructure;
use hypgrass::{Point, Xpq};
use nalgebra::{DMatrix, DVector};

/// Greedy definitional oracle for the hyperbolic principal angles:
/// iterated maximization of B(x, y) over Q-unit vectors of E and F by
/// alternating projected power ascent, deflating after each extracted pair.
///
/// Returns the values c_1 >= c_2 >= ... (cosh of the angles).
pub fn greedy_cosh_oracle(space: &Xpq, e: &Point, f: &Point) -> Vec<f64> {
    let p = space.p();
    // In canonical frames, Q-unit vectors of E are exactly A a with
    // ||a|| = 1, and B(A a, B b) = a^T C b.
    let c = e.frame().transpose() * space.form().apply_phi(f.frame());
    let mut found_a: Vec<DVector<f64>> = Vec::new();
    let mut found_b: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::with_capacity(p);
    for level in 0..p {
        let project = |v: &DVector<f64>, family: &[DVector<f64>]| -> DVector<f64> {
            let mut r = v.clone();
            for w in family {
                let coeff = w.dot(&r);
                r -= w * coeff;
            }
            r
        };
        // Deterministic start vector inside the remaining subspace.
        let mut b = DVector::from_fn(p, |i, _| 1.0 + 0.1 * (i as f64 + level as f64));
        b = project(&b, &found_b);
        if b.norm() < 1e-12 {
            b = DVector::from_fn(p, |i, _| if i == level { 1.0 } else { 0.01 });
            b = project(&b, &found_b);
        }
        b /= b.norm();
        let mut a = DVector::zeros(p);
        let mut value = f64::NEG_INFINITY;
        for _ in 0..20_000 {
            a = project(&(&c * &b), &found_a);
            let na = a.norm();
            if na < 1e-300 {
                break;
            }
            a /= na;
            b = project(&(c.transpose() * &a), &found_b);
            let nb = b.norm();
            if nb < 1e-300 {
                break;
            }
            b /= nb;
            let v = (a.transpose() * &c * &b)[(0, 0)];
            if (v - value).abs() < 1e-13 * v.abs().max(1.0) {
                value = v;
                break;
            }
            value = v;
        }
        out.push(value);
        found_a.push(a);
        found_b.push(b);
    }
    out
}

/// A random K-frame with positive definite K-Gram: identity stack in the
/// positive block plus a scaled random negative part.
pub fn random_kframe(ks: &KStructure, seed: u64, spread: f64) -> DMatrix<f64> {
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = || {
        let u = ((rng.next_u64() >> 11) as f64 + 0.5) / 9007199254740992.0;
        2.0 * u - 1.0
    };
    let d = ks.d();
    let rows = ks.kframe_rows();
    let mut m = DMatrix::zeros(rows, ks.p());
    for col in 0..ks.p() {
        // K-coordinate `col` of the column is 1 (real part).
        m[(d * col, col)] = 1.0;
        for blk in ks.p()..(ks.p() + ks.q()) {
            for r in 0..d {
                m[(d * blk + r, col)] = spread * next();
            }
        }
    }
    m
}

/// Random points pushed out until the cloud diameter reaches `min_diam`.
pub fn spread_cloud(space: &Xpq, seed: u64, count: usize, min_diam: f64) -> Vec<Point> {
    let mut spread = 1.5;
    loop {
        let pts: Vec<Point> = (0..count)
            .map(|k| space.random_point(seed.wrapping_mul(seed_mix(k)) ^ k as u64, spread))
            .collect();
        let mut diam = 0.0f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                diam = diam.max(space.distance(&pts[i], &pts[j]).unwrap());
            }
        }
        if diam >= min_diam {
            return pts;
        }
        spread *= 1.5;
    }
}

fn seed_mix(k: usize) -> u64 {
    0x9e3779b97f4a7c15u64.wrapping_add(k as u64).wrapping_mul(0x2545f4914f6cdd1d) | 1
}
