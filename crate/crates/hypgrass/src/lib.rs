//! Numerical geometry of the finite-rank symmetric spaces X_{p,q}.
//!
//! The space X_{p,q} consists of the p-dimensional subspaces of R^{p+q} on
//! which the signature-(p,q) bilinear form is positive definite. It is a
//! complete CAT(0) space of rank p; this crate computes its hyperbolic
//! principal angles, distances, geodesics and isometries (`space`), generic
//! CAT(0) constructions such as projections and circumcenters (`cat0`), the
//! boundary at infinity with Busemann functions, Tits angles and isotropic
//! flags (`boundary`), and the complex/quaternionic reductions (`kfields`).

pub mod ambient;
pub mod boundary;
pub mod cat0;
pub mod error;
pub mod kfields;
pub mod linalg;
pub mod space;
pub mod tol;

pub use error::{Error, Result};
pub use space::{AngleSpectrum, FlatChart, Geodesic, Isometry, Point, Xpq};
pub use tol::TolProfile;
