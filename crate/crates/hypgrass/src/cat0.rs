//! Generic CAT(0) procedures over X_{p,q}: comparison angles, projections
//! onto convex sets, minimax circumcenters, the Jung probe, nested chains and
//! the center-of-directions construction.

use nalgebra::{DMatrix, DVector};

use crate::boundary::{busemann, ray_point, rebase, BoundaryPoint};
use crate::error::{Error, Result};
use crate::space::{Point, Xpq};

/// Law-of-cosines angle from three side lengths, clamped into [0, pi].
pub fn comparison_angle_from_distances(a: f64, b: f64, c: f64) -> f64 {
    let cosv = ((a * a + b * b - c * c) / (2.0 * a * b)).clamp(-1.0, 1.0);
    cosv.acos()
}

/// The comparison angle at x between y and z.
pub fn comparison_angle(space: &Xpq, x: &Point, y: &Point, z: &Point) -> Result<f64> {
    let a = space.distance(x, y)?;
    let b = space.distance(x, z)?;
    if a <= 1e-12 || b <= 1e-12 {
        return Err(Error::CoincidentPoints { dist: a.min(b) });
    }
    let c = space.distance(y, z)?;
    Ok(comparison_angle_from_distances(a, b, c))
}

/// A closed convex subset of X_{p,q}.
#[derive(Debug, Clone)]
pub enum ConvexSet {
    /// Closed metric ball.
    Ball { center: Point, radius: f64 },
    /// Sublevel set {x : beta_xi(x, xi.chart.base) <= level}.
    Horoball { xi: BoundaryPoint, level: f64 },
    /// Affine subspace of lambda-coordinates inside one flat:
    /// {exp(chart, offset + directions * s)}. `directions` has Euclidean
    /// orthonormal columns; zero columns make the set a single point.
    Subflat {
        chart: crate::space::FlatChart,
        offset: DVector<f64>,
        directions: DMatrix<f64>,
    },
    /// Coordinate sub-truncation X_{p, q_inner}: frames supported on the
    /// first p + q_inner coordinates.
    TotallyGeodesic { q_inner: usize },
}

impl ConvexSet {
    pub fn kind(&self) -> &'static str {
        match self {
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::Horoball { .. } => "horoball",
            ConvexSet::Subflat { .. } => "subflat",
            ConvexSet::TotallyGeodesic { .. } => "totally_geodesic",
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConvexSet::Ball { .. } => true,
            ConvexSet::Subflat { directions, .. } => directions.ncols() == 0,
            _ => false,
        }
    }

    /// Membership within tolerance.
    pub fn membership(&self, space: &Xpq, x: &Point, tol: f64) -> Result<bool> {
        match self {
            ConvexSet::Ball { center, radius } => {
                Ok(space.distance(center, x)? <= radius + tol)
            }
            ConvexSet::Horoball { xi, level } => {
                let b = busemann(space, xi, x, &xi.chart().base, 1e6)?;
                Ok(b.value <= level + tol)
            }
            ConvexSet::Subflat {
                chart,
                offset,
                directions,
            } => match space.flat_coords(chart, x) {
                Some(lam) => {
                    let rel = &lam - offset;
                    let resid = &rel - directions * (directions.transpose() * &rel);
                    Ok(2f64.sqrt() * resid.norm() <= tol)
                }
                None => Ok(false),
            },
            ConvexSet::TotallyGeodesic { q_inner } => {
                let start = space.p() + q_inner;
                let mut worst = 0.0f64;
                for i in start..space.dim() {
                    for j in 0..space.p() {
                        worst = worst.max(x.frame()[(i, j)].abs());
                    }
                }
                Ok(worst <= tol * x.frame().amax().max(1.0))
            }
        }
    }
}

/// Metric projection onto a convex set.
///
/// Balls and horoballs have closed forms; subflats and coordinate
/// sub-truncations alternate a log toward the target with a flat projection
/// of the lambda-step until the step falls below the solver tolerance.
pub fn project(space: &Xpq, set: &ConvexSet, x: &Point) -> Result<Point> {
    match set {
        ConvexSet::Ball { center, radius } => {
            let d = space.distance(center, x)?;
            if d <= *radius {
                return Ok(x.clone());
            }
            space.geodesic(center, x)?.at(space, radius / d)
        }
        ConvexSet::Horoball { xi, level } => {
            let b = busemann(space, xi, x, &xi.chart().base, 1e6)?;
            if b.value <= *level {
                return Ok(x.clone());
            }
            // Busemann functions decrease at unit speed along their rays, so
            // flowing toward xi by the excess is exact.
            let at_x = rebase(space, xi, x)?;
            ray_point(space, &at_x, b.value - level)
        }
        ConvexSet::Subflat {
            chart,
            offset,
            directions,
        } => {
            if let Some(lam) = space.flat_coords(chart, x) {
                let rel = &lam - offset;
                let target = offset + directions * (directions.transpose() * &rel);
                return space.exp_map(chart, &target);
            }
            project_subflat_iterative(space, chart, offset, directions, x)
        }
        ConvexSet::TotallyGeodesic { q_inner } => {
            project_truncation_iterative(space, *q_inner, x)
        }
    }
}

/// lambda-step at mu inside `chart` pointing toward x: the tangent pairing of
/// log_z(x) against the chart's coordinate directions.
fn chart_step_toward(
    space: &Xpq,
    chart: &crate::space::FlatChart,
    mu: &DVector<f64>,
    z: &Point,
    x: &Point,
) -> Result<DVector<f64>> {
    let ncomp = space.negative_complement(z)?;
    let h = space.tangent_log(z, x, &ncomp)?;
    let p = space.p();
    let mut step = DVector::zeros(p);
    let phi_z = space.form().apply_phi(z.frame());
    for i in 0..p {
        let u_mu = chart.u.column(i) * mu[i].cosh() + chart.v.column(i) * mu[i].sinh();
        let v_mu = chart.u.column(i) * mu[i].sinh() + chart.v.column(i) * mu[i].cosh();
        let a = phi_z.transpose() * u_mu;
        let b = -(ncomp.transpose() * space.form().apply_phi_vec(&v_mu));
        // <H, a b^T>_F
        step[i] = (a.transpose() * &h * b)[(0, 0)];
    }
    Ok(step)
}

fn project_subflat_iterative(
    space: &Xpq,
    chart: &crate::space::FlatChart,
    offset: &DVector<f64>,
    directions: &DMatrix<f64>,
    x: &Point,
) -> Result<Point> {
    let mut mu = offset.clone();
    let mut z = space.exp_map(chart, &mu)?;
    let mut fz = space.distance(&z, x)?;
    let max_iters = space.tol().max_iters;
    let mut stagnant = 0usize;
    for _ in 0..max_iters {
        let full = chart_step_toward(space, chart, &mu, &z, x)?;
        let rel = &mu - offset;
        let along = directions * (directions.transpose() * (&rel + &full)) - &rel;
        let step_norm = 2f64.sqrt() * along.norm();
        if step_norm < space.tol().solver_step {
            return Ok(z);
        }
        let mut t = 1.0;
        loop {
            let cand_mu = &mu + &along * t;
            let cand = space.exp_map(chart, &cand_mu)?;
            let fc = space.distance(&cand, x)?;
            if fc <= fz + 1e-14 {
                // The step estimate bottoms out at the angle resolution
                // floor; distance stagnation marks convergence there.
                if fc > fz - 1e-13 * (1.0 + fz) {
                    stagnant += 1;
                } else {
                    stagnant = 0;
                }
                mu = cand_mu;
                z = cand;
                fz = fc;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Ok(z);
            }
        }
        if stagnant >= 3 {
            return Ok(z);
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        residual: fz,
    })
}

fn truncate_frame(space: &Xpq, q_inner: usize, frame: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = frame.clone();
    for i in (space.p() + q_inner)..space.dim() {
        for j in 0..out.ncols() {
            out[(i, j)] = 0.0;
        }
    }
    out
}

fn project_truncation_iterative(space: &Xpq, q_inner: usize, x: &Point) -> Result<Point> {
    if q_inner >= space.q() || q_inner == 0 {
        return Err(Error::InvalidParameter(format!(
            "q_inner must be in 1..q, got {q_inner}"
        )));
    }
    // Truncation is a valid member and an excellent starting guess.
    let trunc = truncate_frame(space, q_inner, x.frame());
    let mut z = match space.point_from_frame(trunc) {
        Ok(p) => p,
        Err(_) => space.base_point(),
    };
    let mut fz = space.distance(&z, x)?;
    let max_iters = space.tol().max_iters;
    let mut stagnant = 0usize;
    for _ in 0..max_iters {
        let ncomp = space.negative_complement(&z)?;
        let h = space.tangent_log(&z, x, &ncomp)?;
        // Allowed directions keep the v-image inside the truncation: rows of
        // N beyond p+q_inner must be annihilated.
        let tail = space.dim() - space.p() - q_inner;
        let mut r = DMatrix::zeros(tail, space.q());
        for i in 0..tail {
            for j in 0..space.q() {
                r[(i, j)] = ncomp[(space.p() + q_inner + i, j)];
            }
        }
        let rrt = &r * r.transpose();
        let rrt_inv = rrt
            .try_inverse()
            .ok_or_else(|| Error::Numerics("degenerate truncation constraint".into()))?;
        let h_proj = &h - &h * r.transpose() * rrt_inv * &r;
        let step_norm = 2f64.sqrt() * h_proj.norm();
        if step_norm < space.tol().solver_step {
            return Ok(z);
        }
        let mut t = 1.0;
        loop {
            let cand = space.tangent_exp(&z, &(&h_proj * t), &ncomp)?;
            // Snap back onto the truncation to keep membership exact.
            let cand = space.point_from_frame(truncate_frame(space, q_inner, cand.frame()))?;
            let fc = space.distance(&cand, x)?;
            if fc <= fz + 1e-14 {
                if fc > fz - 1e-13 * (1.0 + fz) {
                    stagnant += 1;
                } else {
                    stagnant = 0;
                }
                z = cand;
                fz = fc;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Ok(z);
            }
        }
        if stagnant >= 3 {
            return Ok(z);
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        residual: fz,
    })
}

/// Euclidean minimum enclosing ball by pairwise Frank-Wolfe on the dual
/// simplex program; linearly convergent, solved to near machine precision.
fn euclidean_meb(points: &[DVector<f64>]) -> (DVector<f64>, f64) {
    let n = points.len();
    if n == 1 {
        return (points[0].clone(), 0.0);
    }
    let sq: Vec<f64> = points.iter().map(|p| p.norm_squared()).collect();
    let far_from = |c: &DVector<f64>| -> usize {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        best
    };
    let i0 = far_from(&points[0]);
    let i1 = far_from(&points[i0]);
    let mut w = vec![0.0f64; n];
    if i0 == i1 {
        w[i0] = 1.0;
    } else {
        w[i0] = 0.5;
        w[i1] = 0.5;
    }
    let center = |w: &[f64]| -> DVector<f64> {
        let mut c = DVector::zeros(points[0].len());
        for (i, p) in points.iter().enumerate() {
            if w[i] > 0.0 {
                c += p * w[i];
            }
        }
        c
    };
    let mut c = center(&w);
    let scale = sq.iter().cloned().fold(1.0f64, f64::max);
    for _ in 0..50_000 {
        let dists: Vec<f64> = points.iter().map(|p| (p - &c).norm_squared()).collect();
        let s = {
            let mut best = 0;
            for i in 1..n {
                if dists[i] > dists[best] {
                    best = i;
                }
            }
            best
        };
        let fmax = dists[s];
        let davg: f64 = (0..n).map(|i| w[i] * dists[i]).sum();
        if fmax - davg <= 1e-13 * scale.max(fmax) {
            break;
        }
        // Away vertex: support point closest to the center.
        let mut a = s;
        let mut amin = f64::INFINITY;
        for i in 0..n {
            if w[i] > 1e-18 && dists[i] < amin {
                amin = dists[i];
                a = i;
            }
        }
        if a == s {
            break;
        }
        let u = &points[s] - &points[a];
        let un = u.norm_squared();
        if un == 0.0 {
            break;
        }
        let t = ((dists[s] - dists[a]) / (2.0 * un)).clamp(0.0, w[a]);
        if t == 0.0 {
            break;
        }
        w[s] += t;
        w[a] -= t;
        c += u * t;
    }
    // Polish: solve the equidistance system on the identified support set;
    // keep the result only when it actually covers everything.
    let dists: Vec<f64> = points.iter().map(|p| (p - &c).norm_squared()).collect();
    let fmax = dists.iter().cloned().fold(0.0f64, f64::max);
    let cut = fmax - (1e-9 * scale.max(fmax)).max(1e-300);
    let support: Vec<usize> = (0..n).filter(|&i| dists[i] >= cut).collect();
    if support.len() >= 2 {
        let s0 = support[0];
        let cols: Vec<DVector<f64>> = support[1..]
            .iter()
            .map(|&i| &points[i] - &points[s0])
            .collect();
        let m = cols.len();
        let mut gram_b = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for i in 0..m {
            for j in 0..m {
                gram_b[(i, j)] = 2.0 * cols[i].dot(&cols[j]);
            }
            rhs[i] = cols[i].norm_squared();
        }
        if let Ok(x) = gram_b.svd(true, true).solve(&rhs, 1e-12) {
            let mut cand = points[s0].clone();
            for (k, col) in cols.iter().enumerate() {
                cand += col * x[k];
            }
            let r_cand = points
                .iter()
                .map(|p| (p - &cand).norm_squared())
                .fold(0.0f64, f64::max);
            if r_cand <= fmax * (1.0 + 1e-12) + 1e-300 {
                c = cand;
            }
        }
    }
    let radius = points
        .iter()
        .map(|p| (p - &c).norm())
        .fold(0.0f64, f64::max);
    (c, radius)
}

/// Result of the minimax-center solve.
#[derive(Debug, Clone)]
pub struct Circumcenter {
    pub center: Point,
    pub radius: f64,
    pub iterations: usize,
}

/// The circumcenter (minimax center) of a finite point set.
///
/// Globalized by the 1/(k+2) geodesic descent toward the current farthest
/// point, then polished by re-centering on the Euclidean minimum enclosing
/// ball of the logged points in the tangent space; the fixed point of that
/// map is exactly the minimax center.
pub fn circumcenter(space: &Xpq, points: &[Point]) -> Result<Circumcenter> {
    if points.is_empty() {
        return Err(Error::EmptyInput("circumcenter"));
    }
    if points.len() == 1 {
        return Ok(Circumcenter {
            center: points[0].clone(),
            radius: 0.0,
            iterations: 0,
        });
    }
    // Coincident input (bitwise-near frames) short-circuits; this also keeps
    // very distant but identical ray points computable.
    let scale = points[0].frame().amax().max(1.0);
    if points
        .iter()
        .all(|p| (p.frame() - points[0].frame()).amax() <= 1e-9 * scale)
    {
        return Ok(Circumcenter {
            center: points[0].clone(),
            radius: 0.0,
            iterations: 0,
        });
    }
    if points.len() == 2 {
        let mid = space.midpoint(&points[0], &points[1])?;
        let radius = space.distance(&points[0], &points[1])? / 2.0;
        return Ok(Circumcenter {
            center: mid,
            radius,
            iterations: 0,
        });
    }

    let maxd = |z: &Point| -> Result<(f64, usize)> {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, x) in points.iter().enumerate() {
            let d = space.distance(z, x)?;
            if d > best.0 {
                best = (d, i);
            }
        }
        Ok(best)
    };

    // Phase 1: geodesic minimax descent.
    let mut z = points[0].clone();
    let mut iterations = 0usize;
    let mut prev = f64::INFINITY;
    for k in 0..80usize {
        let (f, far) = maxd(&z)?;
        if (prev - f).abs() < 1e-6 {
            break;
        }
        prev = f;
        if f <= 1e-12 {
            break;
        }
        let frac = 1.0 / (k as f64 + 2.0);
        z = space.geodesic(&z, &points[far])?.at(space, frac)?;
        iterations += 1;
    }

    // Phase 2: tangent-space re-centering.
    let mut fz = maxd(&z)?.0;
    let mut stagnant = 0usize;
    for _ in 0..60usize {
        iterations += 1;
        let ncomp = space.negative_complement(&z)?;
        let mut logs = Vec::with_capacity(points.len());
        for x in points {
            let h = space.tangent_log(&z, x, &ncomp)?;
            let mut v = DVector::zeros(space.p() * space.q());
            let mut idx = 0;
            for j in 0..space.q() {
                for i in 0..space.p() {
                    v[idx] = h[(i, j)];
                    idx += 1;
                }
            }
            logs.push(v);
        }
        let (c_vec, _) = euclidean_meb(&logs);
        let step_norm = 2f64.sqrt() * c_vec.norm();
        if step_norm < space.tol().solver_improve.min(1e-9) + 1e-12 {
            break;
        }
        let mut hmat = DMatrix::zeros(space.p(), space.q());
        let mut idx = 0;
        for j in 0..space.q() {
            for i in 0..space.p() {
                hmat[(i, j)] = c_vec[idx];
                idx += 1;
            }
        }
        let mut t = 1.0;
        let mut stalled = false;
        loop {
            let cand = space.tangent_exp(&z, &(&hmat * t), &ncomp)?;
            let fc = maxd(&cand)?.0;
            if fc <= fz + 1e-13 {
                if fc > fz - 1e-13 * (1.0 + fz) {
                    stagnant += 1;
                } else {
                    stagnant = 0;
                }
                z = cand;
                fz = fc;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                stalled = true;
                break;
            }
        }
        if stalled || stagnant >= 2 {
            break;
        }
    }

    Ok(Circumcenter {
        center: z,
        radius: fz,
        iterations,
    })
}

/// Jung-probe report: circumradius against the dimension-n Jung bound.
#[derive(Debug, Clone)]
pub struct JungReport {
    pub radius: f64,
    pub diameter: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// rad/diam against sqrt(n / (2(n+1))) + delta.
pub fn jung_probe(space: &Xpq, points: &[Point], n: usize, delta: f64) -> Result<JungReport> {
    if points.len() < 2 {
        return Err(Error::EmptyInput("jung_probe needs at least two points"));
    }
    let cc = circumcenter(space, points)?;
    let mut diameter = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            diameter = diameter.max(space.distance(&points[i], &points[j])?);
        }
    }
    let ratio = if diameter > 0.0 {
        cc.radius / diameter
    } else {
        0.0
    };
    let bound = (n as f64 / (2.0 * (n as f64 + 1.0))).sqrt() + delta;
    Ok(JungReport {
        radius: cc.radius,
        diameter,
        ratio,
        bound,
        pass: ratio <= bound,
    })
}

/// A finite list of convex sets, non-increasing under inclusion.
#[derive(Debug, Clone)]
pub struct NestedChain {
    sets: Vec<ConvexSet>,
}

impl NestedChain {
    /// Validates nesting of consecutive sets: exact rules for ball-in-ball
    /// and horoball-in-horoball, sampled membership probes otherwise.
    pub fn new(space: &Xpq, sets: Vec<ConvexSet>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::EmptyInput("chain"));
        }
        for idx in 0..sets.len() - 1 {
            let outer = &sets[idx];
            let inner = &sets[idx + 1];
            let ok = match (outer, inner) {
                (
                    ConvexSet::Ball {
                        center: co,
                        radius: ro,
                    },
                    ConvexSet::Ball {
                        center: ci,
                        radius: ri,
                    },
                ) => {
                    // Farthest point of the inner ball from the outer center.
                    space.distance(co, ci)? + ri <= ro + 1e-9 * (1.0 + ro)
                }
                (
                    ConvexSet::Horoball {
                        xi: xo,
                        level: lo,
                    },
                    ConvexSet::Horoball {
                        xi: xi_in,
                        level: li,
                    },
                ) => {
                    let same = crate::boundary::tits_angle(
                        space,
                        xo,
                        xi_in,
                        &xo.chart().base,
                        1e3,
                    )?;
                    if same.value > 1e-6 {
                        false
                    } else {
                        // Busemann base offset between the two charts.
                        let off =
                            busemann(space, xo, &xi_in.chart().base, &xo.chart().base, 1e6)?;
                        li + off.value <= lo + 1e-7
                    }
                }
                _ => {
                    let mut ok = true;
                    for probe in 0..6u64 {
                        let sample = space.random_point(1_000 + probe + idx as u64 * 17, 1.0);
                        let inside = project(space, inner, &sample)?;
                        if !outer.membership(space, &inside, 1e-6)? {
                            ok = false;
                            break;
                        }
                    }
                    ok
                }
            };
            if !ok {
                return Err(Error::NotNested { index: idx });
            }
        }
        Ok(NestedChain { sets })
    }

    pub fn sets(&self) -> &[ConvexSet] {
        &self.sets
    }
}

/// Outcome of the nested-intersection walk.
#[derive(Debug, Clone)]
pub struct NestedIntersection {
    pub point: Point,
    /// Worst violation of d(c, c')^2 <= 2 (r'^2 - r^2) along the run.
    pub cauchy_violation: f64,
    /// First index where consecutive circumcenters were within 1e-6.
    pub converged_at: Option<usize>,
}

/// Limit of circumcenters along a bounded nested chain; the result is a
/// member of the last set. The circumcenter-difference inequality is audited
/// for every consecutive pair.
pub fn nested_intersection(space: &Xpq, chain: &NestedChain) -> Result<NestedIntersection> {
    let mut centers = Vec::with_capacity(chain.sets.len());
    let mut radii = Vec::with_capacity(chain.sets.len());
    for set in &chain.sets {
        match set {
            ConvexSet::Ball { center, radius } => {
                centers.push(center.clone());
                radii.push(*radius);
            }
            ConvexSet::Subflat {
                chart,
                offset,
                directions,
            } if directions.ncols() == 0 => {
                centers.push(space.exp_map(chart, offset)?);
                radii.push(0.0);
            }
            other => {
                return Err(Error::UnboundedSet { kind: other.kind() });
            }
        }
    }
    let mut cauchy_violation = 0.0f64;
    let mut converged_at = None;
    for i in 0..centers.len() - 1 {
        let d = space.distance(&centers[i], &centers[i + 1])?;
        let bound = 2.0 * (radii[i] * radii[i] - radii[i + 1] * radii[i + 1]);
        cauchy_violation = cauchy_violation.max(d * d - bound);
        if converged_at.is_none() && d < 1e-6 {
            converged_at = Some(i);
        }
    }
    Ok(NestedIntersection {
        point: centers.last().unwrap().clone(),
        cauchy_violation,
        converged_at,
    })
}

/// Convergence record of the center-of-directions construction.
#[derive(Debug, Clone)]
pub struct CenterOfDirections {
    pub xi: BoundaryPoint,
    /// Diameter of the truncated projection points per usable grid value.
    pub spreads: Vec<f64>,
    /// Angle drift between successive direction estimates (radians).
    pub drifts: Vec<f64>,
    /// True when the bounded-spread case was detected (the projections share
    /// a single limit direction).
    pub bounded_case: bool,
    /// True when some drift exceeded 1e-3 rad.
    pub drift_flagged: bool,
}

/// The boundary direction of an unbounded nested chain: project the base
/// point onto each set, truncate the projection segments at each grid scale,
/// take circumcenters of the last `tail` truncations and follow them out.
pub fn center_of_directions(
    space: &Xpq,
    chain: &NestedChain,
    base: &Point,
    t_grid: &[f64],
    tail: usize,
) -> Result<CenterOfDirections> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "t_grid must be strictly increasing with at least two entries".into(),
        ));
    }
    if t_grid[t_grid.len() - 1] / t_grid[0] < 99.99 {
        return Err(Error::InvalidParameter(
            "t_grid must span at least two decades".into(),
        ));
    }
    let tail = tail.max(1);

    // Projection data per set: distance from base and the unit ray toward
    // the projection (analytic for horoballs, logged otherwise).
    let mut dists = Vec::with_capacity(chain.sets.len());
    let mut rays: Vec<Option<BoundaryPoint>> = Vec::with_capacity(chain.sets.len());
    for set in &chain.sets {
        match set {
            ConvexSet::Horoball { xi, level } => {
                let b = busemann(space, xi, base, &xi.chart().base, 1e6)?;
                let move_by = (b.value - level).max(0.0);
                dists.push(move_by);
                if move_by > 0.0 {
                    rays.push(Some(rebase(space, xi, base)?));
                } else {
                    rays.push(None);
                }
            }
            other => {
                let x = project(space, other, base)?;
                let d = space.distance(base, &x)?;
                dists.push(d);
                if d > 1e-9 {
                    let (chart, lam) = space.log_map(base, &x)?;
                    rays.push(Some(BoundaryPoint::new(space, chart, lam)?));
                } else {
                    rays.push(None);
                }
            }
        }
    }
    let d_last = *dists.last().unwrap();
    if d_last < t_grid[0] {
        return Err(Error::NonEmptyIntersection {
            detail: format!(
                "projection distance {d_last:.3e} onto the final set is below the smallest grid value {:.3e}",
                t_grid[0]
            ),
        });
    }

    let mut spreads = Vec::new();
    let mut drifts = Vec::new();
    let mut current: Option<BoundaryPoint> = None;
    let mut bounded_case = true;
    for &t in t_grid {
        // Tail of sets reaching at least distance t.
        let usable: Vec<usize> = (0..chain.sets.len())
            .filter(|&i| dists[i] >= t && rays[i].is_some())
            .collect();
        if usable.is_empty() {
            continue;
        }
        let tail_idx: Vec<usize> = usable
            .iter()
            .rev()
            .take(tail)
            .cloned()
            .rev()
            .collect();
        let truncated: Vec<Point> = tail_idx
            .iter()
            .map(|&i| ray_point(space, rays[i].as_ref().unwrap(), t))
            .collect::<Result<_>>()?;
        // Spread and circumcenter; coincident truncations short-circuit.
        let scale = truncated[0].frame().amax().max(1.0);
        let coincident = truncated
            .iter()
            .all(|p| (p.frame() - truncated[0].frame()).amax() <= 1e-9 * scale);
        let direction = if coincident {
            spreads.push(0.0);
            rays[*tail_idx.last().unwrap()].as_ref().unwrap().clone()
        } else {
            let mut spread = 0.0f64;
            for i in 0..truncated.len() {
                for j in (i + 1)..truncated.len() {
                    spread = spread.max(space.distance(&truncated[i], &truncated[j])?);
                }
            }
            spreads.push(spread);
            if spread > 0.05 * t {
                bounded_case = false;
            }
            let cc = circumcenter(space, &truncated)?;
            let (chart, lam) = space.log_map(base, &cc.center)?;
            BoundaryPoint::new(space, chart, lam)?
        };
        if let Some(prev) = &current {
            let a = ray_point(space, prev, 1.0)?;
            let b = ray_point(space, &direction, 1.0)?;
            let gap = space.distance(&a, &b)?;
            drifts.push(2.0 * (gap / 2.0 / 2f64.sqrt()).min(1.0).asin());
        }
        current = Some(direction);
    }
    let xi = current.ok_or_else(|| Error::NonEmptyIntersection {
        detail: "no grid value was reachable by the projections".into(),
    })?;
    let drift_flagged = drifts.iter().any(|&d| d > 1e-3);
    Ok(CenterOfDirections {
        xi,
        spreads,
        drifts,
        bounded_case,
        drift_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{boundary_from_flag, flag_of, tits_angle};

    #[test]
    fn comparison_angle_examples() {
        let space = Xpq::new(2, 2).unwrap();
        let chart = space.standard_chart();
        let o = space.exp_map(&chart, &DVector::from_vec(vec![0.0, 0.0])).unwrap();
        let a = space.exp_map(&chart, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let b = space.exp_map(&chart, &DVector::from_vec(vec![0.0, 1.0])).unwrap();
        // Right isoceles triangle in a Euclidean flat.
        let ang = comparison_angle(&space, &o, &a, &b).unwrap();
        assert!((ang - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        // y = z gives zero.
        let zero = comparison_angle(&space, &o, &a, &a).unwrap();
        assert!(zero < 1e-7);
        assert!(comparison_angle(&space, &o, &o, &a).is_err());
    }

    #[test]
    fn alexandrov_monotonicity_sampled() {
        let space = Xpq::new(2, 3).unwrap();
        let x = space.random_point(201, 0.8);
        let y = space.random_point(202, 0.8);
        let z = space.random_point(203, 0.8);
        let gy = space.geodesic(&x, &y).unwrap();
        let gz = space.geodesic(&x, &z).unwrap();
        let full = comparison_angle(&space, &x, &y, &z).unwrap();
        let mut prev = full;
        for &t in &[0.75, 0.5, 0.25, 0.1] {
            let yt = gy.at(&space, t).unwrap();
            let zt = gz.at(&space, t).unwrap();
            let ang = comparison_angle(&space, &x, &yt, &zt).unwrap();
            assert!(ang <= prev + 1e-7, "angle grew when shrinking toward x");
            prev = ang;
        }
    }

    #[test]
    fn ball_projection_closed_form() {
        let space = Xpq::new(1, 2).unwrap();
        let center = space.base_point();
        let set = ConvexSet::Ball {
            center: center.clone(),
            radius: 1.0,
        };
        // x at distance 3 along a known geodesic: projection is gamma(1/3).
        let chart = space.standard_chart();
        let dir = DVector::from_vec(vec![3.0 / 2f64.sqrt()]);
        let x = space.exp_map(&chart, &dir).unwrap();
        assert!((space.distance(&center, &x).unwrap() - 3.0).abs() < 1e-9);
        let proj = project(&space, &set, &x).unwrap();
        let expect = space.geodesic(&center, &x).unwrap().at(&space, 1.0 / 3.0).unwrap();
        assert!(space.same_subspace(&proj, &expect, 1e-8).unwrap());
        // Members project to themselves.
        let inside = space.geodesic(&center, &x).unwrap().at(&space, 0.2).unwrap();
        let same = project(&space, &set, &inside).unwrap();
        assert!(space.same_subspace(&same, &inside, 1e-10).unwrap());
    }

    #[test]
    fn horoball_projection_lands_on_horosphere() {
        let space = Xpq::new(2, 2).unwrap();
        let xi = BoundaryPoint::new(
            &space,
            space.standard_chart(),
            DVector::from_vec(vec![1.0, 0.4]),
        )
        .unwrap();
        let set = ConvexSet::Horoball {
            xi: xi.clone(),
            level: -1.0,
        };
        let x = space.random_point(301, 0.5);
        let proj = project(&space, &set, &x).unwrap();
        let b = busemann(&space, &xi, &proj, &xi.chart().base, 1e5).unwrap();
        assert!(
            (b.value + 1.0).abs() < 1e-5,
            "projection busemann {} != -1",
            b.value
        );
        assert!(set.membership(&space, &proj, 1e-4).unwrap());
    }

    #[test]
    fn subflat_projection_euclidean_in_coordinates() {
        let space = Xpq::new(2, 3).unwrap();
        let chart = space.standard_chart();
        // The axis {lambda = (s, 0)} inside the standard flat.
        let dirs = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let set = ConvexSet::Subflat {
            chart: chart.clone(),
            offset: DVector::zeros(2),
            directions: dirs,
        };
        let x = space
            .exp_map(&chart, &DVector::from_vec(vec![0.7, 0.5]))
            .unwrap();
        let proj = project(&space, &set, &x).unwrap();
        let expect = space
            .exp_map(&chart, &DVector::from_vec(vec![0.7, 0.0]))
            .unwrap();
        assert!(space.same_subspace(&proj, &expect, 1e-8).unwrap());
    }

    #[test]
    fn subflat_projection_off_flat_obtuse() {
        let space = Xpq::new(2, 3).unwrap();
        let chart = space.standard_chart();
        let dirs = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let set = ConvexSet::Subflat {
            chart: chart.clone(),
            offset: DVector::zeros(2),
            directions: dirs,
        };
        let x = space.random_point(401, 0.6);
        let y = project(&space, &set, &x).unwrap();
        if space.distance(&x, &y).unwrap() > 1e-4 {
            // Obtuse-angle property against sampled members.
            for s in [-1.0f64, -0.3, 0.4, 1.2] {
                let z = space
                    .exp_map(&chart, &DVector::from_vec(vec![s, 0.0]))
                    .unwrap();
                if space.distance(&y, &z).unwrap() < 1e-6 {
                    continue;
                }
                let ang = comparison_angle(&space, &y, &x, &z).unwrap();
                assert!(
                    ang >= std::f64::consts::FRAC_PI_2 - 1e-4,
                    "angle {ang} at s={s}"
                );
                // Minimality among samples.
                assert!(
                    space.distance(&x, &z).unwrap() >= space.distance(&x, &y).unwrap() - 1e-6
                );
            }
        }
    }

    #[test]
    fn truncation_projection_matches_known_best() {
        // X_{1,1} inside X_{1,2}: tanh t* = tanh(a) cos(theta).
        let space = Xpq::new(1, 2).unwrap();
        let a = 0.9f64;
        let theta = 0.6f64;
        let frame = DMatrix::from_column_slice(
            3,
            1,
            &[a.cosh(), a.sinh() * theta.cos(), a.sinh() * theta.sin()],
        );
        let x = space.point_from_frame(frame).unwrap();
        let set = ConvexSet::TotallyGeodesic { q_inner: 1 };
        let proj = project(&space, &set, &x).unwrap();
        let t_star = (a.tanh() * theta.cos()).atanh();
        let expect = space
            .point_from_frame(DMatrix::from_column_slice(
                3,
                1,
                &[t_star.cosh(), t_star.sinh(), 0.0],
            ))
            .unwrap();
        assert!(
            space.same_subspace(&proj, &expect, 1e-7).unwrap(),
            "projection disagrees with the closed form"
        );
        assert!(set.membership(&space, &proj, 1e-8).unwrap());
    }

    #[test]
    fn projection_is_one_lipschitz() {
        let space = Xpq::new(2, 3).unwrap();
        let set = ConvexSet::Ball {
            center: space.random_point(501, 0.5),
            radius: 0.8,
        };
        for seed in 0..8 {
            let x = space.random_point(600 + seed, 1.2);
            let y = space.random_point(700 + seed, 1.2);
            let px = project(&space, &set, &x).unwrap();
            let py = project(&space, &set, &y).unwrap();
            let lhs = space.distance(&px, &py).unwrap();
            let rhs = space.distance(&x, &y).unwrap();
            assert!(lhs <= rhs + 1e-7, "projection expanded: {lhs} > {rhs}");
        }
    }

    #[test]
    fn circumcenter_small_cases() {
        let space = Xpq::new(2, 2).unwrap();
        let a = space.random_point(801, 0.8);
        let single = circumcenter(&space, std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.radius, 0.0);

        let b = space.random_point(802, 0.8);
        let two = circumcenter(&space, &[a.clone(), b.clone()]).unwrap();
        let mid = space.midpoint(&a, &b).unwrap();
        assert!(space.same_subspace(&two.center, &mid, 1e-6).unwrap());
        let d = space.distance(&a, &b).unwrap();
        assert!((two.radius - d / 2.0).abs() < 1e-9);
    }

    #[test]
    fn circumcenter_right_triangle_in_flat() {
        let space = Xpq::new(2, 2).unwrap();
        let chart = space.standard_chart();
        let pts = [
            space.exp_map(&chart, &DVector::from_vec(vec![0.0, 0.0])).unwrap(),
            space.exp_map(&chart, &DVector::from_vec(vec![2.0, 0.0])).unwrap(),
            space.exp_map(&chart, &DVector::from_vec(vec![0.0, 2.0])).unwrap(),
        ];
        let cc = circumcenter(&space, &pts).unwrap();
        let expect = space
            .exp_map(&chart, &DVector::from_vec(vec![1.0, 1.0]))
            .unwrap();
        assert!(
            space.same_subspace(&cc.center, &expect, 1e-5).unwrap(),
            "center off the hypotenuse midpoint"
        );
        assert!((cc.radius - 2.0).abs() < 1e-6, "radius {}", cc.radius);
    }

    #[test]
    fn circumcenter_restarts_agree() {
        let space = Xpq::new(2, 3).unwrap();
        let pts: Vec<Point> = (0..6).map(|k| space.random_point(900 + k, 1.0)).collect();
        let c1 = circumcenter(&space, &pts).unwrap();
        let mut rev = pts.clone();
        rev.reverse();
        let c2 = circumcenter(&space, &rev).unwrap();
        assert!(
            space.distance(&c1.center, &c2.center).unwrap() < 1e-5,
            "restart gap {}",
            space.distance(&c1.center, &c2.center).unwrap()
        );
        assert!((c1.radius - c2.radius).abs() < 1e-7);
        // No sampled move toward a farthest point improves the max by much.
        let far: Vec<&Point> = pts
            .iter()
            .filter(|x| space.distance(&c1.center, x).unwrap() > c1.radius - 1e-6)
            .collect();
        for f in far {
            let nudge = space.geodesic(&c1.center, f).unwrap().at(&space, 1e-3).unwrap();
            let worst = pts
                .iter()
                .map(|x| space.distance(&nudge, x).unwrap())
                .fold(0.0f64, f64::max);
            assert!(worst >= c1.radius - 1e-6);
        }
    }

    #[test]
    fn jung_two_points_and_equilateral() {
        let space = Xpq::new(2, 2).unwrap();
        let a = space.random_point(1001, 0.7);
        let b = space.random_point(1002, 0.7);
        let rep = jung_probe(&space, &[a, b], 1, 0.05).unwrap();
        assert!((rep.ratio - 0.5).abs() < 1e-9);
        assert!(rep.pass);

        // Equilateral triple in a flat: ratio = 1/sqrt(3), the Jung equality
        // case for n = 2.
        let chart = space.standard_chart();
        let s = 1.2f64;
        let pts = [
            space.exp_map(&chart, &DVector::from_vec(vec![0.0, 0.0])).unwrap(),
            space.exp_map(&chart, &DVector::from_vec(vec![s, 0.0])).unwrap(),
            space
                .exp_map(&chart, &DVector::from_vec(vec![s / 2.0, s * 3f64.sqrt() / 2.0]))
                .unwrap(),
        ];
        let rep = jung_probe(&space, &pts, 2, 0.05).unwrap();
        assert!(
            (rep.ratio - (1.0 / 3f64.sqrt())).abs() < 1e-6,
            "ratio {}",
            rep.ratio
        );
        assert!(rep.pass);
    }

    #[test]
    fn nested_chain_validation_and_intersection() {
        let space = Xpq::new(2, 2).unwrap();
        let center = space.base_point();
        let sets: Vec<ConvexSet> = (0..5)
            .map(|k| ConvexSet::Ball {
                center: center.clone(),
                radius: 2.0 - 0.3 * k as f64,
            })
            .collect();
        let chain = NestedChain::new(&space, sets).unwrap();
        let out = nested_intersection(&space, &chain).unwrap();
        assert!(space.same_subspace(&out.point, &center, 1e-9).unwrap());
        assert!(out.cauchy_violation <= 1e-9);
        assert!(out.converged_at.is_some());

        // A non-nested pair is rejected.
        let offset = space.random_point(1101, 1.5);
        let bad = NestedChain::new(
            &space,
            vec![
                ConvexSet::Ball {
                    center: center.clone(),
                    radius: 0.5,
                },
                ConvexSet::Ball {
                    center: offset,
                    radius: 0.5,
                },
            ],
        );
        assert!(matches!(bad, Err(Error::NotNested { .. })));

        // Unbounded sets are rejected by the intersection walk.
        let xi = BoundaryPoint::new(
            &space,
            space.standard_chart(),
            DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        let horo_chain = NestedChain::new(
            &space,
            vec![ConvexSet::Horoball { xi, level: -1.0 }],
        )
        .unwrap();
        assert!(matches!(
            nested_intersection(&space, &horo_chain),
            Err(Error::UnboundedSet { .. })
        ));
    }

    #[test]
    fn nested_intersection_single_ball() {
        let space = Xpq::new(2, 2).unwrap();
        let center = space.random_point(1301, 0.6);
        let chain = NestedChain::new(
            &space,
            vec![ConvexSet::Ball {
                center: center.clone(),
                radius: 1.0,
            }],
        )
        .unwrap();
        let out = nested_intersection(&space, &chain).unwrap();
        assert!(space.same_subspace(&out.point, &center, 1e-10).unwrap());
    }

    #[test]
    fn center_of_directions_recovers_horoball_axis() {
        let space = Xpq::new(2, 2).unwrap();
        let eta = BoundaryPoint::new(
            &space,
            space.standard_chart(),
            DVector::from_vec(vec![1.0, 0.4]),
        )
        .unwrap();
        let sets: Vec<ConvexSet> = (1..=8)
            .map(|k| ConvexSet::Horoball {
                xi: eta.clone(),
                level: -(k as f64) * 100.0,
            })
            .collect();
        let chain = NestedChain::new(&space, sets).unwrap();
        let base = space.base_point();
        let grid = [1.0, 10.0, 100.0, 400.0, 800.0];
        let out = center_of_directions(&space, &chain, &base, &grid, 5).unwrap();
        assert!(out.bounded_case);
        assert!(!out.drift_flagged);
        let t = tits_angle(&space, &out.xi, &eta, &base, 1e3).unwrap();
        assert!(t.value <= 1e-3, "tits angle {}", t.value);
        // Flag agreement is even stronger.
        let f1 = flag_of(&space, &out.xi).unwrap();
        let f2 = flag_of(&space, &eta).unwrap();
        assert!(f1.subspace_gap(&f2) < 1e-7);
        // Direction angle stays within pi/2 of every generator at infinity.
        assert!(t.value <= std::f64::consts::FRAC_PI_2 + 1e-2);
        let _ = boundary_from_flag(&space, &f1).unwrap();
    }

    #[test]
    fn center_of_directions_unit_level_chain() {
        // Levels -1..-8 with a two-decade grid below the chain depth.
        let space = Xpq::new(2, 2).unwrap();
        let eta = BoundaryPoint::new(
            &space,
            space.standard_chart(),
            DVector::from_vec(vec![1.0, 0.4]),
        )
        .unwrap();
        let sets: Vec<ConvexSet> = (1..=8)
            .map(|k| ConvexSet::Horoball {
                xi: eta.clone(),
                level: -(k as f64),
            })
            .collect();
        let chain = NestedChain::new(&space, sets).unwrap();
        let base = space.base_point();
        let grid = [0.05, 0.5, 5.0];
        let out = center_of_directions(&space, &chain, &base, &grid, 5).unwrap();
        let t = tits_angle(&space, &out.xi, &eta, &base, 1e3).unwrap();
        assert!(t.value <= 1e-3, "tits angle {}", t.value);
        assert!(out.bounded_case);
    }

    #[test]
    fn center_of_directions_rejects_bounded_chain() {
        let space = Xpq::new(2, 2).unwrap();
        let center = space.base_point();
        let sets: Vec<ConvexSet> = (0..4)
            .map(|k| ConvexSet::Ball {
                center: center.clone(),
                radius: 2.0 - 0.4 * k as f64,
            })
            .collect();
        let chain = NestedChain::new(&space, sets).unwrap();
        let grid = [1.0, 10.0, 100.0];
        let out = center_of_directions(&space, &chain, &center, &grid, 3);
        assert!(matches!(out, Err(Error::NonEmptyIntersection { .. })));
    }

    #[test]
    fn interleaved_chains_share_direction() {
        let space = Xpq::new(2, 2).unwrap();
        let eta = BoundaryPoint::new(
            &space,
            space.standard_chart(),
            DVector::from_vec(vec![1.0, 0.7]),
        )
        .unwrap();
        let mk = |offset: f64| -> NestedChain {
            let sets: Vec<ConvexSet> = (1..=8)
                .map(|k| ConvexSet::Horoball {
                    xi: eta.clone(),
                    level: -(k as f64) * 100.0 - offset,
                })
                .collect();
            NestedChain::new(&space, sets).unwrap()
        };
        let base = space.random_point(1201, 0.4);
        let grid = [1.0, 10.0, 100.0, 600.0];
        let a = center_of_directions(&space, &mk(0.0), &base, &grid, 5).unwrap();
        let b = center_of_directions(&space, &mk(50.0), &base, &grid, 5).unwrap();
        let t = tits_angle(&space, &a.xi, &b.xi, &base, 1e3).unwrap();
        assert!(t.value <= 1e-3, "independence violated: {}", t.value);
    }
}
