//! The ambient space R^{p+q} with the signature-(p,q) form: B(x,y) = x^T Phi y,
//! Q-orthogonal projectors, isotropy tests and isometry residuals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// The indefinite form Q_p on R^{p+q}: Phi = diag(+1 x p, -1 x q).
///
/// Requires p >= 1 and q >= p so that p-dimensional positive subspaces exist
/// in general position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureForm {
    p: usize,
    q: usize,
}

impl SignatureForm {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidParameter("p must be at least 1".into()));
        }
        if q < p {
            return Err(Error::InvalidParameter(format!(
                "q must be at least p (got p={p}, q={q})"
            )));
        }
        Ok(SignatureForm { p, q })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    /// The Gram matrix Phi as a dense matrix.
    pub fn phi(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.p {
            m[(i, i)] = 1.0;
        }
        for i in self.p..self.dim() {
            m[(i, i)] = -1.0;
        }
        m
    }

    /// Sign of the i-th diagonal entry of Phi.
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.p {
            1.0
        } else {
            -1.0
        }
    }

    /// Phi * m computed by row scaling.
    pub fn apply_phi(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for i in self.p..self.dim() {
            for j in 0..m.ncols() {
                out[(i, j)] = -out[(i, j)];
            }
        }
        out
    }

    /// Phi * v for a vector.
    pub fn apply_phi_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for i in self.p..self.dim() {
            out[i] = -out[i];
        }
        out
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }
}

/// A frame: columns spanning a subspace of R^{p+q}.
///
/// Construction validates linear independence of the columns (smallest
/// singular value relative to the largest above `rank_tol`).
#[derive(Debug, Clone)]
pub struct FrameMatrix {
    cols: DMatrix<f64>,
}

impl FrameMatrix {
    pub fn new(cols: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        if cols.ncols() == 0 || cols.nrows() == 0 {
            return Err(Error::EmptyInput("frame"));
        }
        if cols.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("frame"));
        }
        let sv = cols.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        if max == 0.0 || min <= rank_tol * max {
            return Err(Error::RankDeficient {
                ratio: if max > 0.0 { min / max } else { 0.0 },
            });
        }
        Ok(FrameMatrix { cols })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cols
    }

    pub fn k(&self) -> usize {
        self.cols.ncols()
    }
}

/// B(x, y) = x^T Phi y.
pub fn bform(form: &SignatureForm, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    form.check_len(x.len())?;
    form.check_len(y.len())?;
    let mut acc = 0.0;
    for i in 0..form.p() {
        acc += x[i] * y[i];
    }
    for i in form.p()..form.dim() {
        acc -= x[i] * y[i];
    }
    Ok(acc)
}

/// Q(x) = B(x, x).
pub fn qform(form: &SignatureForm, x: &DVector<f64>) -> Result<f64> {
    bform(form, x, x)
}

/// The restricted Gram matrix A^T Phi A of the span of A's columns.
pub fn gram(form: &SignatureForm, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    form.check_len(a.nrows())?;
    Ok(a.transpose() * form.apply_phi(a))
}

/// True iff the smallest eigenvalue exceeds `tol` scaled by the largest
/// absolute eigenvalue. Errors when the input is not symmetric within `tol`.
pub fn is_positive_definite(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > tol * scale {
        return Err(Error::NotSymmetric { residual: asym });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eigs = sym.symmetric_eigenvalues();
    let max_abs = eigs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eigs.min();
    Ok(min > tol * max_abs.max(1.0))
}

/// Smallest and largest-magnitude eigenvalues of a symmetric matrix.
pub(crate) fn symmetric_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eigs = sym.symmetric_eigenvalues();
    let max_abs = eigs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    (eigs.min(), max_abs)
}

/// The Q-orthogonal projector P = A (A^T Phi A)^{-1} A^T Phi onto span(A).
///
/// Satisfies P^2 = P, P A = A and B(Px, y) = B(x, Py). Errors when the
/// restricted Gram matrix is singular (degenerate subspace).
pub fn q_projector(form: &SignatureForm, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = gram(form, a)?;
    let (_, max_abs) = symmetric_extremes(&g);
    let min_abs = g
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &e| acc.min(e.abs()));
    if min_abs <= 1e-12 * max_abs.max(1.0) {
        return Err(Error::DegenerateSubspace { min_abs });
    }
    let ginv = g
        .try_inverse()
        .ok_or(Error::DegenerateSubspace { min_abs })?;
    Ok(a * ginv * a.transpose() * form.phi())
}

/// True iff every entry of the restricted Gram matrix has magnitude <= tol.
pub fn is_totally_isotropic(form: &SignatureForm, a: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let g = gram(form, a)?;
    Ok(g.amax() <= tol)
}

/// Max-norm of M^T Phi M - Phi; callers treat small values as membership in
/// O(p, q).
pub fn check_isometry(form: &SignatureForm, m: &DMatrix<f64>) -> Result<f64> {
    form.check_len(m.nrows())?;
    form.check_len(m.ncols())?;
    let res = m.transpose() * form.apply_phi(m) - form.phi();
    Ok(res.amax())
}

/// B-orthonormalize columns against an existing family with known signs,
/// in place. `family` holds columns w with Q(w) = sign_of(w) in {+1, -1}.
pub(crate) fn b_project_out(
    form: &SignatureForm,
    family: &[(DVector<f64>, f64)],
    v: &DVector<f64>,
) -> DVector<f64> {
    let mut r = v.clone();
    // Two passes of modified Gram-Schmidt keep the residual orthogonal even
    // for nearly dependent inputs.
    for _ in 0..2 {
        for (w, s) in family {
            let coeff = s * bform(form, w, &r).expect("dims checked by caller");
            r -= w * coeff;
        }
    }
    r
}

/// Deterministic extension: scan the standard basis and collect `count`
/// B-orthonormal vectors of negative square, B-orthogonal to `family`.
pub(crate) fn negative_extension(
    form: &SignatureForm,
    family: &[(DVector<f64>, f64)],
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    let mut fam: Vec<(DVector<f64>, f64)> = family.to_vec();
    let mut out = Vec::with_capacity(count);
    for k in 0..form.dim() {
        if out.len() == count {
            break;
        }
        let mut e = DVector::zeros(form.dim());
        e[k] = 1.0;
        let r = b_project_out(form, &fam, &e);
        let qr = qform(form, &r)?;
        let norm2 = r.norm_squared();
        // Candidates already inside the span leave rounding-level residue
        // whose sign is meaningless; demand a substantial residual.
        if norm2 > 1e-12 && qr < -1e-8 * norm2 {
            let mut v = r / (-qr).sqrt();
            if linalg::column_needs_flip(&v) {
                v = -v;
            }
            fam.push((v.clone(), -1.0));
            out.push(v);
        }
    }
    if out.len() < count {
        return Err(Error::AmbientTooSmall {
            needed: count,
            found: out.len(),
        });
    }
    Ok(out)
}
