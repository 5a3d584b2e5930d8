//! Complex and quaternionic points via realification.
//!
//! A K-frame over K = C or H is stored as a real ((p+q) d) x p matrix whose
//! rows come in d-blocks, one block per K-coordinate (the real form of
//! Re(B_p), which is B_{dp} on the realified space). Realifying a K-point
//! interleaves each K-column with its images under the structure operators,
//! producing a point of X_{dp, dq}(R) whose angle spectrum repeats each
//! K-angle d times.

use nalgebra::{DMatrix, DVector};

use crate::ambient::SignatureForm;
use crate::error::{Error, Result};
use crate::space::{AngleSpectrum, Isometry, Point, Xpq};
use crate::tol::TolProfile;

/// The coefficient field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KKind {
    R,
    C,
    H,
}

impl KKind {
    /// Real dimension of the field.
    pub fn d(&self) -> usize {
        match self {
            KKind::R => 1,
            KKind::C => 2,
            KKind::H => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KKind::R => "R",
            KKind::C => "C",
            KKind::H => "H",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "R" => Some(KKind::R),
            "C" => Some(KKind::C),
            "H" => Some(KKind::H),
            _ => None,
        }
    }
}

/// Right multiplication by i on one d-block, as a d x d matrix.
fn block_i(d: usize) -> DMatrix<f64> {
    match d {
        2 => DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
        4 => DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, -1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, -1.0, 0.0,
            ],
        ),
        _ => unreachable!(),
    }
}

fn block_j() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, -1.0, 0.0, //
            0.0, 0.0, 0.0, -1.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0,
        ],
    )
}

fn block_k() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 0.0, -1.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, -1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0,
        ],
    )
}

/// The K-structure on the realified ambient space R^{d(p+q)}.
#[derive(Debug, Clone)]
pub struct KStructure {
    kind: KKind,
    p: usize,
    q: usize,
}

impl KStructure {
    pub fn new(kind: KKind, p: usize, q: usize) -> Result<Self> {
        // Validates the K-dimensions through the real form.
        SignatureForm::new(p, q)?;
        Ok(KStructure { kind, p, q })
    }

    pub fn kind(&self) -> KKind {
        self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d(&self) -> usize {
        self.kind.d()
    }

    /// The realified signature form on R^{d(p+q)}.
    pub fn real_form(&self) -> SignatureForm {
        SignatureForm::new(self.d() * self.p, self.d() * self.q).expect("valid by construction")
    }

    /// The real space X_{dp, dq} hosting realified points.
    pub fn real_space(&self) -> Xpq {
        Xpq::new(self.d() * self.p, self.d() * self.q).expect("valid by construction")
    }

    pub fn real_space_with_profile(&self, tol: TolProfile) -> Xpq {
        Xpq::with_profile(self.d() * self.p, self.d() * self.q, tol).expect("valid by construction")
    }

    /// The d-1 ambient structure matrices (right multiplication by i, and for
    /// H also by j and k), acting block-diagonally on R^{d(p+q)}.
    pub fn j_ops(&self) -> Vec<DMatrix<f64>> {
        let d = self.d();
        if d == 1 {
            return Vec::new();
        }
        let blocks: Vec<DMatrix<f64>> = match self.kind {
            KKind::C => vec![block_i(2)],
            KKind::H => vec![block_i(4), block_j(), block_k()],
            KKind::R => unreachable!(),
        };
        let n = self.p + self.q;
        blocks
            .into_iter()
            .map(|b| {
                let mut m = DMatrix::zeros(d * n, d * n);
                for blk in 0..n {
                    for r in 0..d {
                        for c in 0..d {
                            m[(d * blk + r, d * blk + c)] = b[(r, c)];
                        }
                    }
                }
                m
            })
            .collect()
    }

    /// Expected shape of a stacked K-frame: ((p+q) d) x p.
    pub fn kframe_rows(&self) -> usize {
        (self.p + self.q) * self.d()
    }
}

fn check_kframe(ks: &KStructure, frame: &DMatrix<f64>) -> Result<()> {
    if frame.nrows() != ks.kframe_rows() {
        return Err(Error::DimensionMismatch {
            expected: ks.kframe_rows(),
            got: frame.nrows(),
        });
    }
    if frame.ncols() != ks.p {
        return Err(Error::DimensionMismatch {
            expected: ks.p,
            got: frame.ncols(),
        });
    }
    if frame.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("k-frame"));
    }
    Ok(())
}

/// Realify a K-frame: each K-column contributes the column itself followed by
/// its images under the structure operators (x, x i (, x j, x k)).
///
/// The output is a valid point of X_{dp, dq}(R); each structure operator
/// preserves its span.
pub fn realify_point(ks: &KStructure, kframe: &DMatrix<f64>) -> Result<Point> {
    check_kframe(ks, kframe)?;
    let space = ks.real_space();
    if ks.d() == 1 {
        return space.point_from_frame(kframe.clone());
    }
    let j_ops = ks.j_ops();
    let d = ks.d();
    let mut real = DMatrix::zeros(ks.kframe_rows(), d * ks.p);
    for col in 0..ks.p {
        let x = kframe.column(col).into_owned();
        real.set_column(d * col, &x);
        for (s, j) in j_ops.iter().enumerate() {
            let jx = j * &x;
            real.set_column(d * col + s + 1, &jx);
        }
    }
    let point = space.point_from_frame(real)?;
    // J-invariance of the span.
    let frame = point.frame();
    let phi_frame = space.form().apply_phi(frame);
    for j in &j_ops {
        let imaged = j * frame;
        let coords = phi_frame.transpose() * &imaged;
        let recon = frame * coords;
        if (&recon - &imaged).amax() > 1e-10 * imaged.amax().max(1.0) {
            return Err(Error::Numerics(
                "realified span is not structure-invariant".into(),
            ));
        }
    }
    Ok(point)
}

/// Deduplicated K-angle spectrum of a pair of K-frames.
///
/// The realified spectrum must consist of p values with multiplicity d
/// (cluster width per `tol.cluster`); the K-distance sqrt(2 d sum alpha^2)
/// coincides with the real distance of the realified pair.
pub fn angles_k(ks: &KStructure, e: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<AngleSpectrum> {
    let space = ks.real_space();
    let pe = realify_point(ks, e)?;
    let pf = realify_point(ks, f)?;
    let real_spec = space.principal_angles(&pe, &pf)?;
    dedup_spectrum(ks, &real_spec, space.tol().cluster)
}

fn dedup_spectrum(ks: &KStructure, real: &AngleSpectrum, cluster: f64) -> Result<AngleSpectrum> {
    let d = ks.d();
    let alphas = real.alphas();
    let mut out = Vec::with_capacity(ks.p);
    for g in 0..ks.p {
        let block = &alphas[g * d..(g + 1) * d];
        let width = block[0] - block[d - 1];
        if width > cluster * (1.0 + block[0]) {
            return Err(Error::MultiplicityPattern { d, width });
        }
        out.push(block.iter().sum::<f64>() / d as f64);
    }
    // Angle spectra are comparable across K and R through duplication.
    Ok(crate::space::AngleSpectrum::from_sorted(out))
}

/// K-distance: sqrt(2 d sum alpha_i^2) over the deduplicated spectrum.
pub fn distance_k(ks: &KStructure, e: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<f64> {
    let spec = angles_k(ks, e, f)?;
    let d = ks.d() as f64;
    Ok((2.0 * d * spec.alphas().iter().map(|a| a * a).sum::<f64>()).sqrt())
}

/// Witt isometry between realified pairs built from K-linear data: every
/// basis vector is chosen together with its structure orbit, so the result
/// commutes with the J operators.
pub fn k_witt_isometry(
    ks: &KStructure,
    e: &DMatrix<f64>,
    f: &DMatrix<f64>,
    e2: &DMatrix<f64>,
    f2: &DMatrix<f64>,
) -> Result<Isometry> {
    let space = ks.real_space();
    let d = ks.d();
    let j_ops = ks.j_ops();
    let form = space.form();

    let spec = angles_k(ks, e, f)?;
    let spec2 = angles_k(ks, e2, f2)?;
    let diff = spec.max_abs_diff(&spec2);
    if diff > space.tol().spectrum_match {
        return Err(Error::SpectrumMismatch {
            max_diff: diff,
            tol: space.tol().spectrum_match,
        });
    }

    let build = |e: &DMatrix<f64>, f: &DMatrix<f64>| -> Result<Vec<DVector<f64>>> {
        let pe = realify_point(ks, e)?;
        let pf = realify_point(ks, f)?;
        let bio = space.biorthogonal_bases(&pe, &pf)?;
        // One representative per d-cluster, closed under the J orbit.
        let mut family: Vec<(DVector<f64>, f64)> = Vec::new();
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let orbit = |v: &DVector<f64>| -> Vec<DVector<f64>> {
            let mut o = vec![v.clone()];
            for j in &j_ops {
                o.push(j * v);
            }
            o
        };
        for g in 0..ks.p {
            let rep = bio.x_basis.column(g * d).into_owned();
            for w in orbit(&rep) {
                let w = crate::ambient::b_project_out(form, &family, &w);
                let qw = crate::ambient::qform(form, &w)?;
                if qw <= 0.0 {
                    return Err(Error::Numerics("k-orbit vector degenerated".into()));
                }
                let w = w / qw.sqrt();
                family.push((w.clone(), 1.0));
                cols.push(w);
            }
        }
        for g in 0..ks.p {
            let alpha = bio.c[g * d].acosh();
            if alpha <= space.tol().angle_zero {
                continue;
            }
            let x = bio.x_basis.column(g * d).into_owned();
            let y = bio.y_basis.column(g * d).into_owned();
            let rep = (y - x * bio.c[g * d]) / alpha.sinh();
            for w in orbit(&rep) {
                let w = crate::ambient::b_project_out(form, &family, &w);
                let qw = crate::ambient::qform(form, &w)?;
                if qw >= 0.0 {
                    return Err(Error::Numerics("k-orbit vector degenerated".into()));
                }
                let w = w / (-qw).sqrt();
                family.push((w.clone(), -1.0));
                cols.push(w);
            }
        }
        // J-closed negative completion: scan K-coordinate blocks.
        let needed = space.q() - (cols.len() - space.p());
        let mut added = 0usize;
        let mut blk = 0usize;
        while added < needed && blk < ks.p + ks.q {
            let mut cand = DVector::zeros(space.dim());
            cand[blk * d] = 1.0;
            let r = crate::ambient::b_project_out(form, &family, &cand);
            let qr = crate::ambient::qform(form, &r)?;
            if r.norm_squared() > 1e-12 && qr < -1e-8 * r.norm_squared() {
                for w in orbit(&(r.clone() / (-qr).sqrt())) {
                    let w = crate::ambient::b_project_out(form, &family, &w);
                    let qw = crate::ambient::qform(form, &w)?;
                    if qw >= 0.0 {
                        return Err(Error::Numerics("k-completion degenerated".into()));
                    }
                    let w = w / (-qw).sqrt();
                    family.push((w.clone(), -1.0));
                    cols.push(w);
                    added += 1;
                }
            }
            blk += 1;
        }
        if cols.len() != space.dim() {
            return Err(Error::AmbientTooSmall {
                needed: space.dim(),
                found: cols.len(),
            });
        }
        Ok(cols)
    };

    let cols_a = build(e, f)?;
    let cols_b = build(e2, f2)?;
    let n = space.dim();
    let mut wa = DMatrix::zeros(n, n);
    let mut wb = DMatrix::zeros(n, n);
    for j in 0..n {
        wa.set_column(j, &cols_a[j]);
        wb.set_column(j, &cols_b[j]);
    }
    let mut s_wa_phi = form.apply_phi(&wa).transpose();
    for i in space.p()..n {
        for j in 0..n {
            s_wa_phi[(i, j)] = -s_wa_phi[(i, j)];
        }
    }
    let g = &wb * s_wa_phi;
    Isometry::new(*form, g, 1e-7)
}
