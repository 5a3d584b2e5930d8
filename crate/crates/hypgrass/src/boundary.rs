//! The boundary at infinity: geodesic rays, Busemann functions, Tits angles,
//! Delta-directions, isotropic flags and parabolic-stabilizer checks.
//!
//! A boundary point is stored as a flat chart plus a unit-speed direction
//! lambda (sqrt(2) ||lambda|| = 1). Two boundary points are asymptotically
//! equal exactly when their isotropic flags and direction values agree, which
//! is also how rays are re-based: the flag data is projected onto the new
//! base point and re-assembled into a chart there.

use nalgebra::{DMatrix, DVector};

use crate::ambient::{
    self, b_project_out, negative_extension, qform, FrameMatrix, SignatureForm,
};
use crate::cat0::comparison_angle_from_distances;
use crate::error::{Error, Result};
use crate::linalg;
use crate::space::{FlatChart, Isometry, Point, Xpq};

/// An asymptotic class of geodesic rays: base chart plus unit direction.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    chart: FlatChart,
    lambda: DVector<f64>,
}

impl BoundaryPoint {
    /// Normalizes lambda to sqrt(2)||lambda|| = 1; rejects the zero direction
    /// and invalid charts.
    pub fn new(space: &Xpq, chart: FlatChart, lambda: DVector<f64>) -> Result<Self> {
        if lambda.len() != space.p() {
            return Err(Error::DimensionMismatch {
                expected: space.p(),
                got: lambda.len(),
            });
        }
        let res = chart.validate(space)?;
        if res > 1e-6 {
            return Err(Error::Numerics(format!(
                "chart invariant residual {res:.3e} too large for a boundary point"
            )));
        }
        let norm = lambda.norm();
        if norm <= 1e-14 {
            return Err(Error::InvalidParameter(
                "boundary direction must be nonzero".into(),
            ));
        }
        let scaled = lambda / (norm * 2f64.sqrt());
        Ok(BoundaryPoint {
            chart,
            lambda: scaled,
        })
    }

    pub fn chart(&self) -> &FlatChart {
        &self.chart
    }

    /// Unit direction: sqrt(2) ||lambda|| = 1.
    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// Largest |lambda_i|: the growth rate of the ray frame.
    pub fn max_rate(&self) -> f64 {
        self.lambda.amax()
    }
}

/// The point on the ray at arc length t >= 0.
pub fn ray_point(space: &Xpq, xi: &BoundaryPoint, t: f64) -> Result<Point> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ray parameter must be non-negative, got {t}"
        )));
    }
    space.exp_map(&xi.chart, &(&xi.lambda * t))
}

/// Weyl-canonical direction type of an oriented segment: sorted, non-negative
/// representative of the flat coordinates, normalized to unit speed.
#[derive(Debug, Clone)]
pub struct DeltaDirection {
    lambda_sorted: DVector<f64>,
}

impl DeltaDirection {
    pub fn components(&self) -> &DVector<f64> {
        &self.lambda_sorted
    }

    /// Spherical angle between canonical representatives.
    pub fn angle_to(&self, other: &DeltaDirection) -> f64 {
        let dot = self.lambda_sorted.dot(&other.lambda_sorted);
        // Both representatives have norm 1/sqrt(2).
        (2.0 * dot).clamp(-1.0, 1.0).acos()
    }
}

/// Delta-direction of the segment from x to y.
pub fn delta_direction(space: &Xpq, x: &Point, y: &Point) -> Result<DeltaDirection> {
    let (_, lambda) = space.log_map(x, y)?;
    let norm = lambda.norm();
    if norm <= 1e-12 {
        return Err(Error::CoincidentPoints { dist: norm });
    }
    // log_map returns the angle spectrum: already sorted non-increasing, >= 0.
    Ok(DeltaDirection {
        lambda_sorted: lambda / (norm * 2f64.sqrt()),
    })
}

/// A nested chain of totally isotropic subspaces.
#[derive(Debug, Clone)]
pub struct IsotropicFlag {
    form: SignatureForm,
    subspaces: Vec<FrameMatrix>,
}

impl IsotropicFlag {
    pub fn new(form: SignatureForm, frames: Vec<DMatrix<f64>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("flag"));
        }
        let mut subspaces = Vec::with_capacity(frames.len());
        let mut prev_dim = 0usize;
        for (level, f) in frames.into_iter().enumerate() {
            let fm = FrameMatrix::new(f, 1e-10)?;
            if fm.k() <= prev_dim || fm.k() > form.p() {
                return Err(Error::FlagNotNested { level });
            }
            prev_dim = fm.k();
            subspaces.push(fm);
        }
        // Largest member must be totally isotropic (scale-relative test).
        let top = subspaces.last().unwrap().matrix();
        let scale = top.amax().max(1.0);
        let g = ambient::gram(&form, top)?;
        if g.amax() > 1e-8 * scale * scale {
            return Err(Error::NotIsotropic { residual: g.amax() });
        }
        // Nesting: every column of level i must lie in the span of level i+1.
        for level in 0..subspaces.len() - 1 {
            let small = subspaces[level].matrix();
            let big = subspaces[level + 1].matrix();
            let qr = big.clone().qr();
            let qmat = qr.q();
            let resid = small - &qmat * (qmat.transpose() * small);
            if resid.amax() > 1e-8 * small.amax().max(1.0) {
                return Err(Error::FlagNotNested { level });
            }
        }
        Ok(IsotropicFlag { form, subspaces })
    }

    pub fn form(&self) -> &SignatureForm {
        &self.form
    }

    pub fn subspaces(&self) -> &[FrameMatrix] {
        &self.subspaces
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subspaces.iter().map(|f| f.k()).collect()
    }

    /// Largest Euclidean gap between corresponding subspaces; infinite when
    /// the dimension patterns differ.
    pub fn subspace_gap(&self, other: &IsotropicFlag) -> f64 {
        if self.dims() != other.dims() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.subspaces.iter().zip(other.subspaces.iter()) {
            let qa = a.matrix().clone().qr().q();
            let qb = b.matrix().clone().qr().q();
            let pa = &qa * qa.transpose();
            let pb = &qb * qb.transpose();
            worst = worst.max((pa - pb).amax());
        }
        worst
    }
}

/// Sort the chart by |lambda| descending and flip signs so the direction is
/// non-negative; returns the permuted chart and sorted direction.
fn standardized_direction(space: &Xpq, xi: &BoundaryPoint) -> (FlatChart, DVector<f64>) {
    let p = space.p();
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| {
        xi.lambda[b]
            .abs()
            .partial_cmp(&xi.lambda[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut u = DMatrix::zeros(space.dim(), p);
    let mut v = DMatrix::zeros(space.dim(), p);
    let mut lam = DVector::zeros(p);
    for (out, &i) in idx.iter().enumerate() {
        u.set_column(out, &xi.chart.u.column(i).into_owned());
        let flip = if xi.lambda[i] < 0.0 { -1.0 } else { 1.0 };
        v.set_column(out, &(xi.chart.v.column(i) * flip));
        lam[out] = xi.lambda[i].abs();
    }
    (
        FlatChart {
            base: xi.chart.base.clone(),
            u,
            v,
        },
        lam,
    )
}

const FLAG_ZERO: f64 = 1e-8;

/// Distinct direction values with their member column indices, from a sorted
/// non-negative lambda. Zero entries are excluded.
fn value_levels(lam: &DVector<f64>, cluster: f64) -> Vec<(f64, Vec<usize>)> {
    let mut levels: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in 0..lam.len() {
        let v = lam[i];
        if v <= FLAG_ZERO {
            continue;
        }
        match levels.last_mut() {
            Some((val, members)) if (*val - v).abs() <= cluster => {
                members.push(i);
                // Keep the representative value stable: first member wins.
                let _ = val;
            }
            _ => levels.push((v, vec![i])),
        }
    }
    levels
}

/// The isotropic flag of a boundary point together with the level values.
fn flag_of_with_values(space: &Xpq, xi: &BoundaryPoint) -> Result<(IsotropicFlag, Vec<f64>)> {
    let (chart, lam) = standardized_direction(space, xi);
    let levels = value_levels(&lam, space.tol().cluster);
    if levels.is_empty() {
        return Err(Error::InvalidParameter(
            "direction has no nonzero components".into(),
        ));
    }
    let mut frames = Vec::with_capacity(levels.len());
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut values = Vec::with_capacity(levels.len());
    for (val, members) in &levels {
        for &j in members {
            let w = chart.u.column(j) + chart.v.column(j);
            cols.push(w);
        }
        let mut frame = DMatrix::zeros(space.dim(), cols.len());
        for (k, c) in cols.iter().enumerate() {
            frame.set_column(k, c);
        }
        frames.push(frame);
        values.push(*val);
    }
    Ok((IsotropicFlag::new(*space.form(), frames)?, values))
}

/// The combinatorial shadow of a boundary point: span{u_j + v_j : lambda_j >=
/// v_i} for the distinct nonzero values v_1 > ... > v_k of the standardized
/// direction.
pub fn flag_of(space: &Xpq, xi: &BoundaryPoint) -> Result<IsotropicFlag> {
    Ok(flag_of_with_values(space, xi)?.0)
}

/// Assemble a chart at `base` realizing a flag with prescribed level values.
///
/// The flag columns are projected onto the base point; the projections are
/// automatically nondegenerate and B-orthogonal to their negative parts, so a
/// filtration-compatible Cholesky whitening yields the chart vectors with
/// u_j + v_j inside the correct flag level.
fn chart_from_flag_values(
    space: &Xpq,
    flag: &IsotropicFlag,
    values: &[f64],
    base: &Point,
) -> Result<(FlatChart, DVector<f64>)> {
    let form = space.form();
    let p = space.p();
    if values.len() != flag.subspaces().len() {
        return Err(Error::InvalidParameter(
            "one value per flag level required".into(),
        ));
    }
    // Filtration-adapted ambient basis of the top subspace.
    let mut adapted: Vec<DVector<f64>> = Vec::new();
    let mut level_values: Vec<f64> = Vec::new();
    for (li, sub) in flag.subspaces().iter().enumerate() {
        let m = sub.matrix();
        for j in 0..m.ncols() {
            let mut r = m.column(j).into_owned();
            for w in &adapted {
                let coeff = w.dot(&r);
                r -= w * coeff;
            }
            let n = r.norm();
            if n > 1e-8 * m.column(j).norm() {
                adapted.push(r / n);
                level_values.push(values[li]);
            }
        }
        if adapted.len() != sub.k() {
            return Err(Error::FlagNotNested { level: li });
        }
    }
    let m = adapted.len();
    if m > p {
        return Err(Error::InvalidParameter("flag deeper than rank".into()));
    }

    // Project onto the base point: a_j in base, b_j in its B-complement.
    let phi_base = form.apply_phi(base.frame());
    let mut amat = DMatrix::zeros(space.dim(), m);
    let mut bmat = DMatrix::zeros(space.dim(), m);
    for (j, w) in adapted.iter().enumerate() {
        let coords = phi_base.transpose() * w;
        let a = base.frame() * coords;
        let b = w - &a;
        amat.set_column(j, &a);
        bmat.set_column(j, &b);
    }
    let s = ambient::gram(form, &amat)?;
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerics("flag projection Gram not positive definite".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Numerics("singular Cholesky factor".into()))?;
    let t = linv.transpose(); // upper triangular: filtration-compatible
    let u_main = &amat * &t;
    let v_main = &bmat * &t;

    // Complete u to a B-orthonormal basis of the base point.
    let mut family: Vec<(DVector<f64>, f64)> = (0..m)
        .map(|j| (u_main.column(j).into_owned(), 1.0))
        .collect();
    let mut u = DMatrix::zeros(space.dim(), p);
    let mut v = DMatrix::zeros(space.dim(), p);
    for j in 0..m {
        u.set_column(j, &u_main.column(j).into_owned());
        v.set_column(j, &v_main.column(j).into_owned());
    }
    let mut filled = m;
    for j in 0..p {
        if filled == p {
            break;
        }
        let cand = base.frame().column(j).into_owned();
        let r = b_project_out(form, &family, &cand);
        let qr = qform(form, &r)?;
        if r.norm_squared() > 1e-12 && qr > 1e-8 * r.norm_squared() {
            let mut col = r / qr.sqrt();
            if linalg::column_needs_flip(&col) {
                col = -col;
            }
            family.push((col.clone(), 1.0));
            u.set_column(filled, &col);
            filled += 1;
        }
    }
    if filled != p {
        return Err(Error::AmbientTooSmall {
            needed: p,
            found: filled,
        });
    }
    for j in 0..m {
        family.push((v.column(j).into_owned(), -1.0));
    }
    let ext = negative_extension(form, &family, p - m)?;
    for (k, col) in ext.into_iter().enumerate() {
        v.set_column(m + k, &col);
    }

    let mut lambda = DVector::zeros(p);
    for j in 0..m {
        lambda[j] = level_values[j];
    }
    let chart = FlatChart {
        base: base.clone(),
        u,
        v,
    };
    Ok((chart, lambda))
}

/// The boundary point of an isotropic flag: level j of k gets direction value
/// k - j + 1 on its dimension gap, zeros beyond, normalized to unit speed.
pub fn boundary_from_flag(space: &Xpq, flag: &IsotropicFlag) -> Result<BoundaryPoint> {
    let k = flag.subspaces().len();
    let values: Vec<f64> = (0..k).map(|j| (k - j) as f64).collect();
    let base = space.base_point();
    let (chart, lambda) = chart_from_flag_values(space, flag, &values, &base)?;
    BoundaryPoint::new(space, chart, lambda)
}

/// Asymptotic representative of `xi` based at `base`, built by transporting
/// the flag-with-values data. Exact: the result has the same flag and the
/// same direction values, hence is asymptotic to `xi`.
pub fn rebase(space: &Xpq, xi: &BoundaryPoint, base: &Point) -> Result<BoundaryPoint> {
    if space.same_subspace(&xi.chart.base, base, 1e-12)? {
        return Ok(xi.clone());
    }
    let (flag, values) = flag_of_with_values(space, xi)?;
    let (chart, lambda) = chart_from_flag_values(space, &flag, &values, base)?;
    BoundaryPoint::new(space, chart, lambda)
}

/// Drift diagnostic for a re-based ray: max(0, d at t_hi - d at t_lo).
/// Asymptotic rays have convex bounded separation, hence non-increasing.
/// The probe parameter is capped so frame pairings stay accurate.
pub fn rebase_drift(
    space: &Xpq,
    original: &BoundaryPoint,
    rebased: &BoundaryPoint,
    t: f64,
) -> Result<f64> {
    let w = original.max_rate() + rebased.max_rate();
    let t = t.min(16.0 / w.max(1e-9));
    let t_lo = (t / 8.0).max(0.5);
    let a_lo = ray_point(space, original, t_lo)?;
    let b_lo = ray_point(space, rebased, t_lo)?;
    let a_hi = ray_point(space, original, t)?;
    let b_hi = ray_point(space, rebased, t)?;
    let d_lo = space.distance(&a_lo, &b_lo)?;
    let d_hi = space.distance(&a_hi, &b_hi)?;
    Ok((d_hi - d_lo).max(0.0))
}

/// Largest ray parameter whose frame pairings stay inside f64 range for the
/// Jacobi kernel (column inner products square the entries).
fn safe_arc(space: &Xpq, frame_scale: f64, rate: f64) -> f64 {
    let budget = 350.0 - frame_scale.max(1.0).ln() - (space.dim() as f64).ln() - 10.0;
    (budget / rate.max(1e-9)).max(8.0)
}

/// Busemann evaluation report.
#[derive(Debug, Clone)]
pub struct BusemannReport {
    /// Extrapolated value of beta_xi(x, y).
    pub value: f64,
    /// Whether successive extrapolation estimates agreed below tolerance.
    pub converged: bool,
    /// Change produced by the last extrapolation column.
    pub last_delta: f64,
    /// Largest ray parameter actually evaluated.
    pub t_used: f64,
    /// Residual of the asymptotic angle formula cross-check
    /// |cos(angle) * d(x,y) - value| at the largest parameter.
    pub aaf_residual: f64,
}

/// beta_xi(x, y) = lim_t d(x, rho(t)) - t for the ray from y toward xi.
///
/// Evaluated basepoint-free as lim_t [d(x, rho(t)) - d(y, rho(t))] along the
/// chart's own ray (the cocycle identity makes the two agree), with Richardson
/// extrapolation in 1/t over a geometric grid capped at t_max.
pub fn busemann(
    space: &Xpq,
    xi: &BoundaryPoint,
    x: &Point,
    y: &Point,
    t_max: f64,
) -> Result<BusemannReport> {
    if t_max <= 0.0 {
        return Err(Error::InvalidParameter("t_max must be positive".into()));
    }
    if space.same_subspace(x, y, 1e-13)? {
        return Ok(BusemannReport {
            value: 0.0,
            converged: true,
            last_delta: 0.0,
            t_used: 0.0,
            aaf_residual: 0.0,
        });
    }
    let scale = x.frame().amax().max(y.frame().amax());
    let t_hi = t_max.min(safe_arc(space, scale, xi.max_rate()));
    let n_pts = 8;
    let ratio: f64 = 0.75;
    let d = space.distance(x, y)?;
    let mut ts = Vec::with_capacity(n_pts);
    let mut fs = Vec::with_capacity(n_pts);
    let mut aafs = Vec::with_capacity(n_pts);
    for k in (0..n_pts).rev() {
        let t = t_hi * ratio.powi(k as i32);
        let fx = space.distance_to_ray(x, xi.chart(), xi.lambda(), t)?;
        let fy = space.distance_to_ray(y, xi.chart(), xi.lambda(), t)?;
        ts.push(t);
        fs.push(fx - fy);
        // Asymptotic angle formula: cos(angle at x between rho(t) and y)
        // times d(x, y) tends to the same limit along an independent route.
        let cosang = ((fx * fx + d * d - fy * fy) / (2.0 * fx * d)).clamp(-1.0, 1.0);
        aafs.push(cosang * d);
    }
    let (value, last_delta) = linalg::extrapolate_in_inverse_t(&ts, &fs);
    let converged = last_delta < space.tol().busemann;
    let (aaf_limit, _) = linalg::extrapolate_in_inverse_t(&ts, &aafs);
    let aaf_residual = (aaf_limit - value).abs();

    Ok(BusemannReport {
        value,
        converged,
        last_delta,
        t_used: t_hi,
        aaf_residual,
    })
}

/// Tits angle evaluation report.
#[derive(Debug, Clone)]
pub struct TitsReport {
    pub value: f64,
    /// True when the comparison-angle samples were non-decreasing within 1e-8.
    pub monotone_ok: bool,
    /// Which evaluation route produced the value.
    pub route: TitsRoute,
    /// Residual of the Busemann slope cross-check, when computed.
    pub slope_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TitsRoute {
    EqualFlags,
    CommonFlat,
    ComparisonLimit,
}

/// The angular (Tits) metric between two boundary points.
///
/// Both rays are re-based at `base`; the returned value is the limit of the
/// comparison angles at `base` between the two ray points, which is
/// non-decreasing in t. Boundary points with identical flag data are
/// asymptotically equal (angle 0); rays in a common flat get the exact
/// Euclidean angle.
pub fn tits_angle(
    space: &Xpq,
    xi: &BoundaryPoint,
    eta: &BoundaryPoint,
    base: &Point,
    t_max: f64,
) -> Result<TitsReport> {
    let xi_b = rebase(space, xi, base)?;
    let eta_b = rebase(space, eta, base)?;

    // Equal boundary points: same flag, same values.
    let (flag_x, vals_x) = flag_of_with_values(space, &xi_b)?;
    let (flag_e, vals_e) = flag_of_with_values(space, &eta_b)?;
    if flag_x.subspace_gap(&flag_e) < 1e-7 && vals_x.len() == vals_e.len() {
        let val_gap = vals_x
            .iter()
            .zip(vals_e.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if val_gap < 1e-7 {
            return Ok(TitsReport {
                value: 0.0,
                monotone_ok: true,
                route: TitsRoute::EqualFlags,
                slope_residual: None,
            });
        }
    }

    // Common-flat fast path: eta's ray has coordinates in xi's chart.
    let probe_t = [1.0, 2.7];
    let mut coords = Vec::new();
    for &t in &probe_t {
        let pt = ray_point(space, &eta_b, t)?;
        match space.flat_coords(&xi_b.chart, &pt) {
            Some(c) => coords.push(c / t),
            None => {
                coords.clear();
                break;
            }
        }
    }
    if coords.len() == probe_t.len() && (&coords[0] - &coords[1]).amax() < 1e-7 {
        let dir = &coords[0];
        let cos = xi_b.lambda.dot(dir) / (xi_b.lambda.norm() * dir.norm());
        return Ok(TitsReport {
            value: cos.clamp(-1.0, 1.0).acos(),
            monotone_ok: true,
            route: TitsRoute::CommonFlat,
            slope_residual: None,
        });
    }

    // Comparison-angle limit from the common base. Double grading limits the
    // safe parameter range; Richardson extrapolation recovers the limit.
    let w = xi_b.max_rate() + eta_b.max_rate();
    let t_hi = t_max
        .min(17.0 / w.max(1e-9))
        .min(9.0 / xi_b.max_rate().max(1e-9))
        .min(9.0 / eta_b.max_rate().max(1e-9));
    let n_pts = 8;
    let ratio: f64 = 0.76;
    let mut ts = Vec::with_capacity(n_pts);
    let mut angles = Vec::with_capacity(n_pts);
    for k in (0..n_pts).rev() {
        let t = t_hi * ratio.powi(k as i32);
        let a = ray_point(space, &xi_b, t)?;
        let b = ray_point(space, &eta_b, t)?;
        let dc = space.distance(&a, &b)?;
        // Rays are unit speed from the common base.
        let ang = comparison_angle_from_distances(t, t, dc);
        ts.push(t);
        angles.push(ang);
    }
    let mut monotone_ok = true;
    for k in 1..angles.len() {
        if angles[k] < angles[k - 1] - 1e-8 {
            monotone_ok = false;
        }
    }
    let (value, _) = linalg::extrapolate_in_inverse_t(&ts, &angles);
    let value = value.clamp(0.0, std::f64::consts::PI);

    // Busemann slope cross-check: beta_eta(rho_xi(t)) / t -> -cos angle.
    let t_probe = ts[ts.len() - 1];
    let pt = ray_point(space, &xi_b, t_probe)?;
    let b = busemann(space, &eta_b, &pt, base, t_max)?;
    let slope_residual = Some(((-b.value / t_probe) - value.cos()).abs());

    Ok(TitsReport {
        value,
        monotone_ok,
        route: TitsRoute::ComparisonLimit,
        slope_residual,
    })
}

/// Verdicts of the parabolic-stabilizer test.
#[derive(Debug, Clone)]
pub struct StabilizerReport {
    /// Structural test: block pattern in the isotropic basis adapted to xi.
    pub block_verdict: bool,
    /// Sampled-growth test: conjugates g_t^{-1} h g_t stay bounded.
    pub bounded_verdict: bool,
    /// Largest violating entry of the block pattern, relative to the matrix
    /// scale.
    pub block_residual: f64,
    /// max_t ||g_t^{-1} h g_t|| / ||h||.
    pub growth_ratio: f64,
}

/// Decide whether `h` stabilizes the boundary point `xi`.
///
/// The structural verdict checks the block conditions in the basis
/// e'_i = (e_i + e_{p+i})/sqrt(2), e'_{p+i} = (e_i - e_{p+i})/sqrt(2) after
/// moving xi to the standard position; the sampled verdict watches the
/// spectral norm of g_t^{-1} h g_t over the given t grid. The block verdict
/// is the authoritative one.
pub fn stabilizer_check(
    space: &Xpq,
    h: &Isometry,
    xi: &BoundaryPoint,
    t_samples: &[f64],
) -> Result<StabilizerReport> {
    let p = space.p();
    let n = space.dim();
    let (chart, lam) = standardized_direction(space, xi);

    // Move the chart to the standard position: u_i -> e_i, v_i -> e_{p+i}.
    let mut family: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut src = DMatrix::zeros(n, n);
    for i in 0..p {
        src.set_column(i, &chart.u.column(i).into_owned());
        family.push((chart.u.column(i).into_owned(), 1.0));
    }
    for i in 0..p {
        src.set_column(p + i, &chart.v.column(i).into_owned());
        family.push((chart.v.column(i).into_owned(), -1.0));
    }
    let ext = negative_extension(space.form(), &family, n - 2 * p)?;
    for (k, col) in ext.into_iter().enumerate() {
        src.set_column(2 * p + k, &col);
    }
    // Standard target family: e_1..e_p, e_{p+1}..e_{2p}, e_{2p+1}..
    let tgt = DMatrix::<f64>::identity(n, n);
    let mut s_src_phi = space.form().apply_phi(&src).transpose();
    for i in p..n {
        for j in 0..n {
            s_src_phi[(i, j)] = -s_src_phi[(i, j)];
        }
    }
    let g0 = &tgt * s_src_phi;
    let g0 = Isometry::new(*space.form(), g0, 1e-6)?;
    let h_std = g0.compose(h).compose(&g0.inverse());

    // Isotropic basis change.
    let mut tmat = DMatrix::zeros(n, n);
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    for i in 0..p {
        tmat[(i, i)] = inv_sqrt2;
        tmat[(p + i, i)] = inv_sqrt2;
        tmat[(i, p + i)] = inv_sqrt2;
        tmat[(p + i, p + i)] = -inv_sqrt2;
    }
    for i in 2 * p..n {
        tmat[(i, i)] = 1.0;
    }
    let hp = tmat.transpose() * h_std.matrix() * &tmat;

    // Level index of each direction entry; usize::MAX marks the zero block.
    let levels = value_levels(&lam, space.tol().cluster);
    let mut level_of = vec![usize::MAX; p];
    for (li, (_, members)) in levels.iter().enumerate() {
        for &j in members {
            level_of[j] = li;
        }
    }
    let zero = |i: usize| level_of[i] == usize::MAX;

    let scale = hp.amax().max(1.0);
    let mut worst = 0.0f64;
    let mut check = |val: f64| {
        worst = worst.max(val.abs() / scale);
    };
    for i in 0..p {
        for j in 0..p {
            // h1 block upper-triangular: zero when lambda_j > lambda_i.
            if !zero(j) && (zero(i) || level_of[i] > level_of[j]) {
                check(hp[(i, j)]);
            }
            // h5 block lower-triangular: zero when lambda_i > lambda_j.
            if !zero(i) && (zero(j) || level_of[j] > level_of[i]) {
                check(hp[(p + i, p + j)]);
            }
            // h4: zero unless lambda_i = lambda_j = 0.
            if !(zero(i) && zero(j)) {
                check(hp[(p + i, j)]);
            }
        }
        // h6 rows with lambda_i > 0 vanish; h7 columns with lambda_j > 0 vanish.
        if !zero(i) {
            for j in 2 * p..n {
                check(hp[(p + i, j)]);
                check(hp[(j, i)]);
            }
        }
    }
    let block_residual = worst;
    let block_verdict = block_residual <= 1e-8;

    // Sampled boundedness: conjugate by diag(e^{t lam}, e^{-t lam}, I).
    let norm_at = |t: f64| -> f64 {
        let mut conj = hp.clone();
        for i in 0..n {
            let wi = if i < p {
                (-t * lam[i]).exp()
            } else if i < 2 * p {
                (t * lam[i - p]).exp()
            } else {
                1.0
            };
            for j in 0..n {
                let wj = if j < p {
                    (t * lam[j]).exp()
                } else if j < 2 * p {
                    (-t * lam[j - p]).exp()
                } else {
                    1.0
                };
                conj[(i, j)] *= wi * wj;
            }
        }
        conj.singular_values().max()
    };
    let base_norm = norm_at(0.0);
    let mut max_norm = base_norm;
    for &t in t_samples {
        max_norm = max_norm.max(norm_at(t));
    }
    let growth_ratio = max_norm / base_norm;
    let bounded_verdict = growth_ratio <= 10.0;

    Ok(StabilizerReport {
        block_verdict,
        bounded_verdict,
        block_residual,
        growth_ratio,
    })
}
