//! Python bindings: the space handle, points, boundary points and the main
//! geometric operations, with frames exchanged as nested lists of floats.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hypgrass::boundary::{
    boundary_from_flag, busemann, delta_direction, flag_of, ray_point, rebase, stabilizer_check,
    tits_angle, BoundaryPoint, IsotropicFlag,
};
use hypgrass::cat0::{circumcenter, comparison_angle, jung_probe, project, ConvexSet};
use hypgrass::{Isometry, Point, Xpq};

fn err(e: hypgrass::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err("empty matrix"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("ragged rows"));
    }
    let mut m = DMatrix::zeros(rows.len(), cols);
    for (i, r) in rows.iter().enumerate() {
        for (j, &x) in r.iter().enumerate() {
            m[(i, j)] = x;
        }
    }
    Ok(m)
}

fn rows_from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// A point of X_{p,q}: a positive-definite p-dimensional subspace.
#[pyclass(name = "Point", from_py_object)]
#[derive(Clone)]
struct PyPoint {
    inner: Point,
}

#[pymethods]
impl PyPoint {
    /// Canonical frame as a list of rows.
    fn frame(&self) -> Vec<Vec<f64>> {
        rows_from_matrix(self.inner.frame())
    }

    fn __repr__(&self) -> String {
        format!(
            "Point(p={}, q={})",
            self.inner.form().p(),
            self.inner.form().q()
        )
    }
}

/// A boundary point: flat chart plus unit-speed direction.
#[pyclass(name = "BoundaryPoint", from_py_object)]
#[derive(Clone)]
struct PyBoundary {
    inner: BoundaryPoint,
}

#[pymethods]
impl PyBoundary {
    /// Unit direction (sqrt(2) * norm = 1).
    fn direction(&self) -> Vec<f64> {
        self.inner.lambda().iter().cloned().collect()
    }

    fn base(&self) -> PyPoint {
        PyPoint {
            inner: self.inner.chart().base.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!("BoundaryPoint(direction={:?})", self.direction())
    }
}

/// The symmetric space X_{p,q}.
#[pyclass(name = "Xpq")]
struct PyXpq {
    inner: Xpq,
}

#[pymethods]
impl PyXpq {
    #[new]
    fn new(p: usize, q: usize) -> PyResult<Self> {
        Ok(PyXpq {
            inner: Xpq::new(p, q).map_err(err)?,
        })
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    /// The base point spanned by the first p coordinate vectors.
    fn base_point(&self) -> PyPoint {
        PyPoint {
            inner: self.inner.base_point(),
        }
    }

    /// Validate and canonicalize a frame given as rows.
    fn point(&self, frame: Vec<Vec<f64>>) -> PyResult<PyPoint> {
        let m = matrix_from_rows(frame)?;
        Ok(PyPoint {
            inner: self.inner.point_from_frame(m).map_err(err)?,
        })
    }

    /// Deterministic pseudo-random point.
    #[pyo3(signature = (seed, spread=1.0))]
    fn random_point(&self, seed: u64, spread: f64) -> PyPoint {
        PyPoint {
            inner: self.inner.random_point(seed, spread),
        }
    }

    /// The point exp(H_lambda) E_0 in the standard flat.
    fn boost(&self, lambda: Vec<f64>) -> PyResult<PyPoint> {
        let chart = self.inner.standard_chart();
        let lam = DVector::from_vec(lambda);
        Ok(PyPoint {
            inner: self.inner.exp_map(&chart, &lam).map_err(err)?,
        })
    }

    /// Hyperbolic principal angles, sorted non-increasing.
    fn angles(&self, a: &PyPoint, b: &PyPoint) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .principal_angles(&a.inner, &b.inner)
            .map_err(err)?
            .alphas()
            .to_vec())
    }

    /// d(a, b) = sqrt(2 sum alpha_i^2).
    fn distance(&self, a: &PyPoint, b: &PyPoint) -> PyResult<f64> {
        self.inner.distance(&a.inner, &b.inner).map_err(err)
    }

    /// Point at parameter t on the geodesic from a to b (t in [0, 1]).
    fn geodesic_point(&self, a: &PyPoint, b: &PyPoint, t: f64) -> PyResult<PyPoint> {
        let geo = self.inner.geodesic(&a.inner, &b.inner).map_err(err)?;
        Ok(PyPoint {
            inner: geo.at(&self.inner, t).map_err(err)?,
        })
    }

    fn midpoint(&self, a: &PyPoint, b: &PyPoint) -> PyResult<PyPoint> {
        Ok(PyPoint {
            inner: self.inner.midpoint(&a.inner, &b.inner).map_err(err)?,
        })
    }

    /// Matrix of the transvection of arc length t from a toward b.
    fn transvection_matrix(&self, a: &PyPoint, b: &PyPoint, t: f64) -> PyResult<Vec<Vec<f64>>> {
        let g = self.inner.transvection(&a.inner, &b.inner, t).map_err(err)?;
        Ok(rows_from_matrix(g.matrix()))
    }

    /// Apply an isometry matrix to a point.
    fn apply(&self, matrix: Vec<Vec<f64>>, x: &PyPoint) -> PyResult<PyPoint> {
        let m = matrix_from_rows(matrix)?;
        let g = Isometry::new(*self.inner.form(), m, self.inner.tol().isometry).map_err(err)?;
        Ok(PyPoint {
            inner: self.inner.apply(&g, &x.inner).map_err(err)?,
        })
    }

    /// Minimax center: returns (center, radius).
    fn circumcenter(&self, points: Vec<PyPoint>) -> PyResult<(PyPoint, f64)> {
        let pts: Vec<Point> = points.into_iter().map(|p| p.inner).collect();
        let cc = circumcenter(&self.inner, &pts).map_err(err)?;
        Ok((PyPoint { inner: cc.center }, cc.radius))
    }

    /// Jung probe: returns (ratio, bound, pass).
    #[pyo3(signature = (points, n, delta=0.05))]
    fn jung_probe(&self, points: Vec<PyPoint>, n: usize, delta: f64) -> PyResult<(f64, f64, bool)> {
        let pts: Vec<Point> = points.into_iter().map(|p| p.inner).collect();
        let rep = jung_probe(&self.inner, &pts, n, delta).map_err(err)?;
        Ok((rep.ratio, rep.bound, rep.pass))
    }

    /// Comparison angle at x between y and z.
    fn comparison_angle(&self, x: &PyPoint, y: &PyPoint, z: &PyPoint) -> PyResult<f64> {
        comparison_angle(&self.inner, &x.inner, &y.inner, &z.inner).map_err(err)
    }

    /// Projection onto the closed ball B(center, radius).
    fn project_ball(&self, x: &PyPoint, center: &PyPoint, radius: f64) -> PyResult<PyPoint> {
        let set = ConvexSet::Ball {
            center: center.inner.clone(),
            radius,
        };
        Ok(PyPoint {
            inner: project(&self.inner, &set, &x.inner).map_err(err)?,
        })
    }

    /// Boundary point of the standard flat with the given direction.
    fn boundary(&self, lambda: Vec<f64>) -> PyResult<PyBoundary> {
        let chart = self.inner.standard_chart();
        Ok(PyBoundary {
            inner: BoundaryPoint::new(&self.inner, chart, DVector::from_vec(lambda))
                .map_err(err)?,
        })
    }

    /// Boundary point of the geodesic ray from a through b.
    fn direction_to(&self, a: &PyPoint, b: &PyPoint) -> PyResult<PyBoundary> {
        let (chart, lam) = self.inner.log_map(&a.inner, &b.inner).map_err(err)?;
        Ok(PyBoundary {
            inner: BoundaryPoint::new(&self.inner, chart, lam).map_err(err)?,
        })
    }

    /// The point at arc length t along the ray.
    fn ray_point(&self, xi: &PyBoundary, t: f64) -> PyResult<PyPoint> {
        Ok(PyPoint {
            inner: ray_point(&self.inner, &xi.inner, t).map_err(err)?,
        })
    }

    /// Asymptotic representative of xi based at x.
    fn rebase(&self, xi: &PyBoundary, x: &PyPoint) -> PyResult<PyBoundary> {
        Ok(PyBoundary {
            inner: rebase(&self.inner, &xi.inner, &x.inner).map_err(err)?,
        })
    }

    /// Busemann value beta_xi(x, y).
    #[pyo3(signature = (xi, x, y, t_max=1e4))]
    fn busemann(&self, xi: &PyBoundary, x: &PyPoint, y: &PyPoint, t_max: f64) -> PyResult<f64> {
        Ok(busemann(&self.inner, &xi.inner, &x.inner, &y.inner, t_max)
            .map_err(err)?
            .value)
    }

    /// Tits (angular metric) angle between boundary points.
    #[pyo3(signature = (xi, eta, base=None, t_max=1e3))]
    fn tits_angle(
        &self,
        xi: &PyBoundary,
        eta: &PyBoundary,
        base: Option<&PyPoint>,
        t_max: f64,
    ) -> PyResult<f64> {
        let base_pt = base
            .map(|p| p.inner.clone())
            .unwrap_or_else(|| xi.inner.chart().base.clone());
        Ok(tits_angle(&self.inner, &xi.inner, &eta.inner, &base_pt, t_max)
            .map_err(err)?
            .value)
    }

    /// Weyl-canonical direction of the segment from a to b.
    fn delta_direction(&self, a: &PyPoint, b: &PyPoint) -> PyResult<Vec<f64>> {
        Ok(delta_direction(&self.inner, &a.inner, &b.inner)
            .map_err(err)?
            .components()
            .iter()
            .cloned()
            .collect())
    }

    /// Isotropic flag of a boundary point, as a list of frames (rows).
    fn flag_of(&self, xi: &PyBoundary) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let flag = flag_of(&self.inner, &xi.inner).map_err(err)?;
        Ok(flag
            .subspaces()
            .iter()
            .map(|f| rows_from_matrix(f.matrix()))
            .collect())
    }

    /// Boundary point realizing an isotropic flag (frames as rows).
    fn boundary_from_flag(&self, subspaces: Vec<Vec<Vec<f64>>>) -> PyResult<PyBoundary> {
        let frames: Vec<DMatrix<f64>> = subspaces
            .into_iter()
            .map(matrix_from_rows)
            .collect::<PyResult<_>>()?;
        let flag = IsotropicFlag::new(*self.inner.form(), frames).map_err(err)?;
        Ok(PyBoundary {
            inner: boundary_from_flag(&self.inner, &flag).map_err(err)?,
        })
    }

    /// Parabolic-stabilizer verdicts: (block, bounded).
    #[pyo3(signature = (matrix, xi, t_samples=vec![0.0, 1.0, 2.0, 4.0, 8.0]))]
    fn stabilizer_check(
        &self,
        matrix: Vec<Vec<f64>>,
        xi: &PyBoundary,
        t_samples: Vec<f64>,
    ) -> PyResult<(bool, bool)> {
        let m = matrix_from_rows(matrix)?;
        let g = Isometry::new(*self.inner.form(), m, self.inner.tol().isometry).map_err(err)?;
        let rep = stabilizer_check(&self.inner, &g, &xi.inner, &t_samples).map_err(err)?;
        Ok((rep.block_verdict, rep.bounded_verdict))
    }

    fn __repr__(&self) -> String {
        format!("Xpq(p={}, q={})", self.inner.p(), self.inner.q())
    }
}

#[pymodule]
fn hypgrass_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyXpq>()?;
    m.add_class::<PyPoint>()?;
    m.add_class::<PyBoundary>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
