//! Points of X_{p,q}, hyperbolic principal angles, biorthogonal bases, the
//! distance formula, flats, geodesics, transvections and Witt isometries.
//!
//! A point is a p-dimensional subspace of R^{p+q} on which the form is
//! positive definite, held as a canonical frame (restricted Gram = identity).
//! The pair invariant is the non-increasing spectrum (alpha_1, ..., alpha_p)
//! of hyperbolic principal angles; the metric is d^2 = 2 sum alpha_i^2.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::ambient::{
    self, b_project_out, bform, check_isometry, negative_extension, qform, FrameMatrix,
    SignatureForm,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::tol::TolProfile;

/// The symmetric space X_{p,q}: handle carrying the form and the tolerance
/// profile. All geometric operations live here.
#[derive(Debug, Clone)]
pub struct Xpq {
    form: SignatureForm,
    tol: TolProfile,
}

/// A p-dimensional positive-definite subspace, stored as a canonical frame.
#[derive(Debug, Clone)]
pub struct Point {
    form: SignatureForm,
    frame: DMatrix<f64>,
}

impl Point {
    pub fn form(&self) -> &SignatureForm {
        &self.form
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }
}

/// Non-increasing tuple of hyperbolic principal angles.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSpectrum {
    alphas: Vec<f64>,
}

impl AngleSpectrum {
    /// Wrap an already-sorted (non-increasing) list of angles.
    pub fn from_sorted(alphas: Vec<f64>) -> Self {
        debug_assert!(alphas.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        AngleSpectrum { alphas }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn max(&self) -> f64 {
        self.alphas.first().copied().unwrap_or(0.0)
    }

    pub fn max_abs_diff(&self, other: &AngleSpectrum) -> f64 {
        self.alphas
            .iter()
            .zip(other.alphas.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Distance carried by this spectrum: sqrt(2 sum alpha_i^2).
    pub fn distance(&self) -> f64 {
        (2.0 * self.alphas.iter().map(|a| a * a).sum::<f64>()).sqrt()
    }
}

/// Biorthogonal bases (x_i) of E and (y_i) of F with B(x_i, y_j) = c_i delta_ij.
#[derive(Debug, Clone)]
pub struct BiorthogonalPair {
    pub x_basis: DMatrix<f64>,
    pub y_basis: DMatrix<f64>,
    pub c: Vec<f64>,
}

/// A maximal flat through `base`: u spans the base point (Q = +1), v is a
/// B-orthogonal family with Q = -1. The map
/// lambda -> span{cosh(lambda_i) u_i + sinh(lambda_i) v_i} embeds
/// (R^p, sqrt(2) * Euclidean) isometrically.
#[derive(Debug, Clone)]
pub struct FlatChart {
    pub base: Point,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

/// An element of O(p, q) acting on points by frame multiplication followed by
/// canonicalization.
#[derive(Debug, Clone)]
pub struct Isometry {
    form: SignatureForm,
    matrix: DMatrix<f64>,
}

impl Isometry {
    pub fn new(form: SignatureForm, matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        let res = check_isometry(&form, &matrix)?;
        if res > tol {
            return Err(Error::Numerics(format!(
                "matrix is not an isometry: residual {res:.3e} > {tol:.3e}"
            )));
        }
        Ok(Isometry { form, matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn form(&self) -> &SignatureForm {
        &self.form
    }

    pub fn residual(&self) -> f64 {
        check_isometry(&self.form, &self.matrix).unwrap_or(f64::INFINITY)
    }

    pub fn inverse(&self) -> Isometry {
        // g^{-1} = Phi g^T Phi for g in O(p, q).
        let phi_gt = self.form.apply_phi(&self.matrix.transpose());
        let inv = self.form.apply_phi(&phi_gt.transpose()).transpose();
        Isometry {
            form: self.form,
            matrix: inv,
        }
    }

    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry {
            form: self.form,
            matrix: &self.matrix * &other.matrix,
        }
    }
}

/// The geodesic through two points, reparametrized to [0, 1].
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub chart: FlatChart,
    pub lambda: DVector<f64>,
    pub length: f64,
}

impl Geodesic {
    /// gamma(t) with gamma(0) the start and gamma(1) the end point.
    pub fn at(&self, space: &Xpq, t: f64) -> Result<Point> {
        space.exp_map(&self.chart, &(&self.lambda * t))
    }
}

impl Xpq {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        Ok(Xpq {
            form: SignatureForm::new(p, q)?,
            tol: TolProfile::default_profile(),
        })
    }

    pub fn with_profile(p: usize, q: usize, tol: TolProfile) -> Result<Self> {
        Ok(Xpq {
            form: SignatureForm::new(p, q)?,
            tol,
        })
    }

    pub fn form(&self) -> &SignatureForm {
        &self.form
    }

    pub fn tol(&self) -> &TolProfile {
        &self.tol
    }

    pub fn p(&self) -> usize {
        self.form.p()
    }

    pub fn q(&self) -> usize {
        self.form.q()
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    /// The base point E_0 spanned by the first p standard basis vectors.
    pub fn base_point(&self) -> Point {
        let mut frame = DMatrix::zeros(self.dim(), self.p());
        for i in 0..self.p() {
            frame[(i, i)] = 1.0;
        }
        Point {
            form: self.form,
            frame,
        }
    }

    /// The standard flat at E_0: u_i = e_i, v_i = e_{p+i}.
    pub fn standard_chart(&self) -> FlatChart {
        let mut u = DMatrix::zeros(self.dim(), self.p());
        let mut v = DMatrix::zeros(self.dim(), self.p());
        for i in 0..self.p() {
            u[(i, i)] = 1.0;
            v[(self.p() + i, i)] = 1.0;
        }
        FlatChart {
            base: self.base_point(),
            u,
            v,
        }
    }

    /// Validate and canonicalize an arbitrary frame into a point.
    pub fn point_from_frame(&self, frame: DMatrix<f64>) -> Result<Point> {
        if frame.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: frame.nrows(),
            });
        }
        if frame.ncols() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: frame.ncols(),
            });
        }
        let frame = FrameMatrix::new(frame, 1e-12)?;
        let canon = self.canonicalize(frame.matrix())?;
        Ok(Point {
            form: self.form,
            frame: canon,
        })
    }

    /// Modified Gram-Schmidt with respect to B, in column order, with the
    /// first-significant-entry-positive convention. Fails when the restricted
    /// form is not positive definite.
    pub fn canonicalize(&self, frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = frame.clone();
        let k = frame.ncols();
        for j in 0..k {
            let mut col = out.column(j).into_owned();
            for _ in 0..2 {
                for i in 0..j {
                    let wi = out.column(i).into_owned();
                    let coeff = bform(&self.form, &wi, &col)?;
                    col -= wi * coeff;
                }
            }
            let qv = qform(&self.form, &col)?;
            if qv <= self.tol.pd_margin * col.norm_squared() {
                return Err(Error::NotPositiveDefinite {
                    margin: qv / col.norm_squared().max(1e-300),
                });
            }
            col /= qv.sqrt();
            if linalg::column_needs_flip(&col) {
                col = -col;
            }
            out.set_column(j, &col);
        }
        Ok(out)
    }

    fn check_same_form(&self, e: &Point, f: &Point) -> Result<()> {
        if e.form != self.form || f.form != self.form {
            return Err(Error::FormMismatch);
        }
        Ok(())
    }

    /// The p x p pairing matrix C = E^T Phi F between canonical frames; its
    /// singular values are the cosh of the principal angles.
    fn pairing(&self, e: &Point, f: &Point) -> DMatrix<f64> {
        e.frame.transpose() * self.form.apply_phi(&f.frame)
    }

    /// Angle from a singular value of the pairing matrix. Values in
    /// [1 - clamp, 1 + ACOSH_FLOOR] collapse to zero: acosh(1 + eps) has an
    /// intrinsic sqrt(2 eps) noise floor, so angles below ~1.4e-7 are not
    /// resolvable in doubles anyway.
    fn angle_from_sigma(&self, s: f64) -> Result<f64> {
        const ACOSH_FLOOR: f64 = 1e-14;
        if s < 1.0 - self.tol.clamp {
            return Err(Error::AngleClampExceeded {
                sigma: s,
                deficit: 1.0 - s,
            });
        }
        if s <= 1.0 + ACOSH_FLOOR {
            Ok(0.0)
        } else {
            Ok(s.acosh())
        }
    }

    /// Hyperbolic principal angles, sorted non-increasing.
    pub fn principal_angles(&self, e: &Point, f: &Point) -> Result<AngleSpectrum> {
        self.check_same_form(e, f)?;
        let c = self.pairing(e, f);
        let (_, sigma, _) = linalg::jacobi_svd(&c);
        let mut alphas = Vec::with_capacity(sigma.len());
        for s in sigma {
            alphas.push(self.angle_from_sigma(s)?);
        }
        alphas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(AngleSpectrum { alphas })
    }

    /// Angles between `x` and the ray point exp(chart, t * dir), computed
    /// from the factored pairing
    /// C_j = cosh(t dir_j) (X^T Phi u_j) + sinh(t dir_j) (X^T Phi v_j)
    /// assembled by exponential splitting. Far ray points cannot be
    /// materialized as frames without destroying their restricted Gram, but
    /// the split keeps every column accurate relative to its own scale.
    pub fn angles_to_ray(
        &self,
        x: &Point,
        chart: &FlatChart,
        dir: &DVector<f64>,
        t: f64,
    ) -> Result<AngleSpectrum> {
        let p = self.p();
        let phi_x = self.form.apply_phi(&x.frame);
        let pu = phi_x.transpose() * &chart.u;
        let pv = phi_x.transpose() * &chart.v;
        let mut c = DMatrix::zeros(p, p);
        for j in 0..p {
            let a = t * dir[j];
            if a.abs() > 700.0 {
                return Err(Error::NonFinite("ray pairing (parameter too large)"));
            }
            let ep = 0.5 * a.exp();
            let em = 0.5 * (-a).exp();
            for i in 0..p {
                let s = pu[(i, j)] + pv[(i, j)];
                let d = pu[(i, j)] - pv[(i, j)];
                c[(i, j)] = ep * s + em * d;
            }
        }
        let (_, sigma, _) = linalg::jacobi_svd(&c);
        let mut alphas = Vec::with_capacity(sigma.len());
        for s in sigma {
            alphas.push(self.angle_from_sigma(s)?);
        }
        alphas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(AngleSpectrum { alphas })
    }

    /// Distance from `x` to the ray point exp(chart, t * dir) (factored).
    pub fn distance_to_ray(
        &self,
        x: &Point,
        chart: &FlatChart,
        dir: &DVector<f64>,
        t: f64,
    ) -> Result<f64> {
        Ok(self.angles_to_ray(x, chart, dir, t)?.distance())
    }

    /// d(E, F) = sqrt(2 sum alpha_i^2).
    pub fn distance(&self, e: &Point, f: &Point) -> Result<f64> {
        Ok(self.principal_angles(e, f)?.distance())
    }

    /// True when the two points are the same subspace (all angles below tol).
    pub fn same_subspace(&self, e: &Point, f: &Point, tol: f64) -> Result<bool> {
        Ok(self.principal_angles(e, f)?.max() <= tol.max(2e-7))
    }

    /// Sine-based subspace gap between the two spans, which resolves
    /// separations far below the acosh floor of the angle spectrum. Zero for
    /// equal subspaces, comparable to the largest principal angle when small.
    pub fn subspace_gap(&self, e: &Point, f: &Point) -> Result<f64> {
        self.check_same_form(e, f)?;
        let qe = e.frame.clone().qr().q();
        let qf = f.frame.clone().qr().q();
        let r1 = &qe - &qf * (qf.transpose() * &qe);
        let r2 = &qf - &qe * (qe.transpose() * &qf);
        Ok((0..self.p())
            .map(|j| r1.column(j).norm().max(r2.column(j).norm()))
            .fold(0.0, f64::max))
    }

    /// Biorthogonal bases: B-orthonormal (x_i) of E and (y_i) of F with
    /// B(x_i, y_j) = c_i delta_ij, c_i = cosh(alpha_i) non-increasing.
    pub fn biorthogonal_bases(&self, e: &Point, f: &Point) -> Result<BiorthogonalPair> {
        self.check_same_form(e, f)?;
        let c = self.pairing(e, f);
        let (u, sigma, v) = linalg::jacobi_svd(&c);
        let mut cs = Vec::with_capacity(sigma.len());
        for &s in &sigma {
            cs.push(self.angle_from_sigma(s)?.cosh());
        }
        let mut x = &e.frame * u;
        let mut y = &f.frame * v;
        // Sign convention on the ambient x_i, compensated on y_i so that
        // B(x_i, y_i) stays +c_i.
        for i in 0..x.ncols() {
            if linalg::column_needs_flip(&x.column(i).into_owned()) {
                for r in 0..x.nrows() {
                    x[(r, i)] = -x[(r, i)];
                    y[(r, i)] = -y[(r, i)];
                }
            }
        }
        Ok(BiorthogonalPair {
            x_basis: x,
            y_basis: y,
            c: cs,
        })
    }

    /// Logarithm: a flat chart at E together with lambda = (alpha_i) such
    /// that exp_map recovers F.
    pub fn log_map(&self, e: &Point, f: &Point) -> Result<(FlatChart, DVector<f64>)> {
        let bio = self.biorthogonal_bases(e, f)?;
        let p = self.p();
        let mut family: Vec<(DVector<f64>, f64)> = (0..p)
            .map(|i| (bio.x_basis.column(i).into_owned(), 1.0))
            .collect();
        let mut v = DMatrix::zeros(self.dim(), p);
        let mut lambda = DVector::zeros(p);
        for i in 0..p {
            let alpha = bio.c[i].acosh();
            lambda[i] = alpha;
            // Angles survive here only above the acosh resolution floor, so
            // the quotient is safe; a zeroed angle gets a free direction.
            if alpha > 0.0 {
                let xi = bio.x_basis.column(i).into_owned();
                let yi = bio.y_basis.column(i).into_owned();
                let mut vi = (yi - xi * bio.c[i]) / alpha.sinh();
                // Hygiene: re-orthogonalize and renormalize Q(v_i) = -1.
                vi = b_project_out(&self.form, &family, &vi);
                let qv = qform(&self.form, &vi)?;
                if qv >= 0.0 {
                    return Err(Error::Numerics(format!(
                        "log direction has non-negative square {qv:.3e}"
                    )));
                }
                vi /= (-qv).sqrt();
                family.push((vi.clone(), -1.0));
                v.set_column(i, &vi);
            } else {
                // Degenerate direction: deterministic negative completion.
                let ext = negative_extension(&self.form, &family, 1)?;
                family.push((ext[0].clone(), -1.0));
                v.set_column(i, &ext[0]);
            }
        }
        let chart = FlatChart {
            base: e.clone(),
            u: bio.x_basis,
            v,
        };
        Ok((chart, lambda))
    }

    /// Exponential: the point with frame columns
    /// cosh(lambda_i) u_i + sinh(lambda_i) v_i.
    pub fn exp_map(&self, chart: &FlatChart, lambda: &DVector<f64>) -> Result<Point> {
        if lambda.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: lambda.len(),
            });
        }
        let mut frame = DMatrix::zeros(self.dim(), self.p());
        for i in 0..self.p() {
            let ch = lambda[i].cosh();
            let sh = lambda[i].sinh();
            if !ch.is_finite() {
                return Err(Error::NonFinite("exp_map frame (lambda too large)"));
            }
            let col = chart.u.column(i) * ch + chart.v.column(i) * sh;
            frame.set_column(i, &col);
        }
        // The chart columns are B-orthonormal, so the frame already is.
        // Beyond cosh ~ 1e2 the Gram entries cosh^2 - sinh^2 cancel
        // catastrophically, so only the sign convention is applied there.
        if frame.amax() < 1e2 {
            let frame = self.canonicalize(&frame)?;
            Ok(Point {
                form: self.form,
                frame,
            })
        } else {
            for j in 0..frame.ncols() {
                linalg::sign_fix_column(&mut frame, j);
            }
            Ok(Point {
                form: self.form,
                frame,
            })
        }
    }

    /// The geodesic from E to F parametrized on [0, 1].
    pub fn geodesic(&self, e: &Point, f: &Point) -> Result<Geodesic> {
        let (chart, lambda) = self.log_map(e, f)?;
        let length = (2.0 * lambda.norm_squared()).sqrt();
        Ok(Geodesic {
            chart,
            lambda,
            length,
        })
    }

    /// Midpoint of the geodesic segment [E, F].
    pub fn midpoint(&self, e: &Point, f: &Point) -> Result<Point> {
        self.geodesic(e, f)?.at(self, 0.5)
    }

    /// Chart coordinates of `x` inside `chart`, when x lies in the flat.
    ///
    /// Returns None when x is not (numerically) a member of the flat.
    pub fn flat_coords(&self, chart: &FlatChart, x: &Point) -> Option<DVector<f64>> {
        let phi_a = self.form.apply_phi(&x.frame);
        let a = chart.u.transpose() * &phi_a;
        let b = -(chart.v.transpose() * &phi_a);
        let scale = x.frame.amax().max(1.0);
        let recon = &chart.u * &a + &chart.v * &b;
        if (&recon - &x.frame).amax() > 1e-8 * scale {
            return None;
        }
        let a_inv = a.try_inverse()?;
        let t = b * a_inv;
        let p = self.p();
        let mut lambda = DVector::zeros(p);
        for i in 0..p {
            for j in 0..p {
                if i != j && t[(i, j)].abs() > 1e-8 {
                    return None;
                }
            }
            let d = t[(i, i)];
            if d.abs() >= 1.0 {
                return None;
            }
            lambda[i] = d.atanh();
        }
        Some(lambda)
    }

    /// The transvection of arc length `t` along the unit-speed geodesic from
    /// E toward F: hyperbolic cosh/sinh blocks on the chart planes, identity
    /// on the B-orthogonal complement.
    pub fn transvection(&self, e: &Point, f: &Point, t: f64) -> Result<Isometry> {
        let (chart, lambda) = self.log_map(e, f)?;
        let total = (2.0 * lambda.norm_squared()).sqrt();
        if total <= 1e-12 {
            return Err(Error::CoincidentPoints { dist: total });
        }
        let rates = &lambda / total;
        self.transvection_along(&chart, &rates, t)
    }

    /// Transvection with explicit unit rates (sqrt(2) * ||rates|| = 1 for a
    /// unit-speed translation axis).
    pub fn transvection_along(
        &self,
        chart: &FlatChart,
        rates: &DVector<f64>,
        t: f64,
    ) -> Result<Isometry> {
        let p = self.p();
        let n = self.dim();
        let mut w = DMatrix::zeros(n, 2 * p);
        for i in 0..p {
            w.set_column(i, &chart.u.column(i).into_owned());
            w.set_column(p + i, &chart.v.column(i).into_owned());
        }
        // S = diag(+1 x p, -1 x p); dual rows are S W^T Phi.
        let mut swt_phi = self.form.apply_phi(&w).transpose();
        for i in p..2 * p {
            for j in 0..n {
                swt_phi[(i, j)] = -swt_phi[(i, j)];
            }
        }
        let mut k = DMatrix::zeros(2 * p, 2 * p);
        for i in 0..p {
            let a = t * rates[i];
            k[(i, i)] = a.cosh();
            k[(i, p + i)] = a.sinh();
            k[(p + i, i)] = a.sinh();
            k[(p + i, p + i)] = a.cosh();
        }
        let proj = &w * &swt_phi;
        let g = &w * k * &swt_phi + DMatrix::identity(n, n) - proj;
        Isometry::new(self.form, g, self.tol.isometry)
    }

    /// Apply an isometry to a point.
    pub fn apply(&self, g: &Isometry, e: &Point) -> Result<Point> {
        if *g.form() != self.form || e.form != self.form {
            return Err(Error::FormMismatch);
        }
        let frame = g.matrix() * &e.frame;
        let frame = self.canonicalize(&frame)?;
        Ok(Point {
            form: self.form,
            frame,
        })
    }

    /// Witt isometry: g in O(p, q) with g E = E' and g F = F', for pairs with
    /// equal angle spectra. Extends the biorthogonal correspondence by a
    /// deterministic isometry between B-orthogonal complements.
    pub fn witt_isometry(&self, e: &Point, f: &Point, e2: &Point, f2: &Point) -> Result<Isometry> {
        let spec = self.principal_angles(e, f)?;
        let spec2 = self.principal_angles(e2, f2)?;
        let diff = spec.max_abs_diff(&spec2);
        if diff > self.tol.spectrum_match {
            return Err(Error::SpectrumMismatch {
                max_diff: diff,
                tol: self.tol.spectrum_match,
            });
        }
        let bio = self.biorthogonal_bases(e, f)?;
        let bio2 = self.biorthogonal_bases(e2, f2)?;
        let p = self.p();
        let active: Vec<bool> = (0..p)
            .map(|i| {
                let mean = 0.5 * (spec.alphas()[i] + spec2.alphas()[i]);
                mean > self.tol.angle_zero
            })
            .collect();

        let build_side = |bio: &BiorthogonalPair| -> Result<Vec<DVector<f64>>> {
            let mut family: Vec<(DVector<f64>, f64)> = (0..p)
                .map(|i| (bio.x_basis.column(i).into_owned(), 1.0))
                .collect();
            let mut cols: Vec<DVector<f64>> =
                (0..p).map(|i| bio.x_basis.column(i).into_owned()).collect();
            for (i, &is_active) in active.iter().enumerate() {
                if !is_active {
                    continue;
                }
                let alpha = bio.c[i].acosh();
                let xi = bio.x_basis.column(i).into_owned();
                let yi = bio.y_basis.column(i).into_owned();
                let mut vi = (yi - xi * bio.c[i]) / alpha.sinh();
                vi = b_project_out(&self.form, &family, &vi);
                let qv = qform(&self.form, &vi)?;
                if qv >= 0.0 {
                    return Err(Error::Numerics(
                        "witt direction has non-negative square".into(),
                    ));
                }
                vi /= (-qv).sqrt();
                family.push((vi.clone(), -1.0));
                cols.push(vi);
            }
            let n_active = active.iter().filter(|&&a| a).count();
            let ext = negative_extension(&self.form, &family, self.q() - n_active)?;
            cols.extend(ext);
            Ok(cols)
        };

        let cols_u = build_side(&bio)?;
        let cols_p = build_side(&bio2)?;
        let n = self.dim();
        let mut wu = DMatrix::zeros(n, n);
        let mut wp = DMatrix::zeros(n, n);
        for (j, (cu, cp)) in cols_u.iter().zip(cols_p.iter()).enumerate() {
            wu.set_column(j, cu);
            wp.set_column(j, cp);
        }
        // g = Wp S Wu^T Phi with S the common sign pattern (+1 x p, -1 x q).
        let mut swt_phi = self.form.apply_phi(&wu).transpose();
        for i in p..n {
            for j in 0..n {
                swt_phi[(i, j)] = -swt_phi[(i, j)];
            }
        }
        let g = &wp * swt_phi;
        let iso = Isometry::new(self.form, g, self.tol.isometry.max(diff * 10.0 + 1e-12))?;
        // Image checks: g E = E' and g F = F' as subspaces.
        let ge = self.apply(&iso, e)?;
        let gf = self.apply(&iso, f)?;
        let gap_e = self.subspace_gap(&ge, e2)?;
        let gap_f = self.subspace_gap(&gf, f2)?;
        let allowed = (self.tol.frame).max(diff * 10.0 + 1e-10);
        if gap_e > allowed || gap_f > allowed {
            return Err(Error::Numerics(format!(
                "witt image mismatch: gap_E {gap_e:.3e}, gap_F {gap_f:.3e}"
            )));
        }
        Ok(iso)
    }

    /// Deterministic pseudo-random point: Gaussian lambda of scale `spread`
    /// in a Haar-ish random chart at the base point.
    pub fn random_point(&self, seed: u64, spread: f64) -> Point {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.p();
        let q = self.q();
        let rp = linalg::random_orthogonal(&mut rng, p);
        let rq = linalg::random_orthogonal(&mut rng, q);
        let mut u = DMatrix::zeros(self.dim(), p);
        let mut v = DMatrix::zeros(self.dim(), p);
        for j in 0..p {
            for i in 0..p {
                u[(i, j)] = rp[(i, j)];
            }
            for i in 0..q {
                v[(p + i, j)] = rq[(i, j)];
            }
        }
        let chart = FlatChart {
            base: self.base_point(),
            u,
            v,
        };
        let mut lambda = DVector::zeros(p);
        for i in 0..p {
            lambda[i] = spread * linalg::standard_normal(&mut rng);
        }
        self.exp_map(&chart, &lambda)
            .expect("random chart is valid by construction")
    }

    /// Deterministic pseudo-random isometry: a block rotation composed with a
    /// transvection between two random points.
    pub fn random_isometry(&self, seed: u64) -> Isometry {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let a = self.random_point(seed.wrapping_mul(2).wrapping_add(1), 0.8);
        let b = self.random_point(seed.wrapping_mul(2).wrapping_add(2), 0.8);
        let t = 0.5 + linalg::standard_normal(&mut rng).abs();
        let trans = self
            .transvection(&a, &b, t)
            .expect("random points are distinct almost surely");
        let rot = self.block_rotation(&linalg::random_orthogonal(&mut rng, self.p()), {
            &linalg::random_orthogonal(&mut rng, self.q())
        });
        trans.compose(&rot)
    }

    /// The O(p) x O(q) element diag(a, b).
    pub fn block_rotation(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Isometry {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        let p = self.p();
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] = a[(i, j)];
            }
        }
        for i in 0..self.q() {
            for j in 0..self.q() {
                m[(p + i, p + j)] = b[(i, j)];
            }
        }
        Isometry::new(self.form, m, self.tol.isometry).expect("block rotations are isometries")
    }

    /// The block matrix exp(H_lambda): cosh/sinh on the first 2p coordinates,
    /// identity beyond.
    pub fn standard_transvection_matrix(&self, lambda: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let p = self.p();
        let mut m = DMatrix::identity(n, n);
        for i in 0..p {
            m[(i, i)] = lambda[i].cosh();
            m[(i, p + i)] = lambda[i].sinh();
            m[(p + i, i)] = lambda[i].sinh();
            m[(p + i, p + i)] = lambda[i].cosh();
        }
        m
    }

    /// Deterministic B-orthonormal basis of the negative complement of a
    /// point's span: q columns with Q = -1.
    pub fn negative_complement(&self, z: &Point) -> Result<DMatrix<f64>> {
        let family: Vec<(DVector<f64>, f64)> = (0..self.p())
            .map(|i| (z.frame.column(i).into_owned(), 1.0))
            .collect();
        let ext = negative_extension(&self.form, &family, self.q())?;
        let mut n = DMatrix::zeros(self.dim(), self.q());
        for (j, col) in ext.iter().enumerate() {
            n.set_column(j, col);
        }
        Ok(n)
    }

    /// Tangent vector at z pointing to x, as the p x q matrix of the
    /// direction in the (frame of z, negative complement) bases. The
    /// Riemannian norm is sqrt(2) times the Frobenius norm.
    pub fn tangent_log(
        &self,
        z: &Point,
        x: &Point,
        ncomp: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let (chart, lambda) = self.log_map(z, x)?;
        let mut h = DMatrix::zeros(self.p(), self.q());
        for i in 0..self.p() {
            if lambda[i] == 0.0 {
                continue;
            }
            let phi_u = self.form.apply_phi_vec(&chart.u.column(i).into_owned());
            let phi_v = self.form.apply_phi_vec(&chart.v.column(i).into_owned());
            let a = z.frame.transpose() * &phi_u;
            let b = -(ncomp.transpose() * &phi_v);
            h += lambda[i] * a * b.transpose();
        }
        Ok(h)
    }

    /// Exponential of a tangent matrix at z (inverse of `tangent_log`).
    pub fn tangent_exp(
        &self,
        z: &Point,
        h: &DMatrix<f64>,
        ncomp: &DMatrix<f64>,
    ) -> Result<Point> {
        let svd = h.clone().svd(true, true);
        let u_small = svd.u.as_ref().expect("svd with vectors");
        let vt = svd.v_t.as_ref().expect("svd with vectors");
        let mut frame = DMatrix::zeros(self.dim(), self.p());
        // h = U S V^T; the chart planes are (Z U_k, N V_k) with rates S_k.
        let rank = svd.singular_values.len();
        let zu = &z.frame * u_small;
        let nv = ncomp * vt.transpose();
        for k in 0..self.p() {
            if k < rank {
                let s = svd.singular_values[k];
                let col = zu.column(k) * s.cosh() + nv.column(k) * s.sinh();
                frame.set_column(k, &col);
            } else {
                frame.set_column(k, &zu.column(k).into_owned());
            }
        }
        let frame = self.canonicalize(&frame)?;
        Ok(Point {
            form: self.form,
            frame,
        })
    }
}

impl FlatChart {
    /// Residual of the chart invariants: Gram(u) = I, Gram(v) = -I, cross
    /// pairings zero, and u spanning the base.
    pub fn validate(&self, space: &Xpq) -> Result<f64> {
        let form = space.form();
        let gu = ambient::gram(form, &self.u)?;
        let gv = ambient::gram(form, &self.v)?;
        let cross = self.u.transpose() * form.apply_phi(&self.v);
        let p = space.p();
        let mut res = (gu - DMatrix::identity(p, p)).amax();
        res = res.max((gv + DMatrix::identity(p, p)).amax());
        res = res.max(cross.amax());
        // u must span the base point.
        let base_proj =
            self.base.frame() * (self.base.frame().transpose() * form.apply_phi(&self.u));
        res = res.max((&base_proj - &self.u).amax());
        Ok(res)
    }
}
