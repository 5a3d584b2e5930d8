//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("signature forms differ between operands")]
    FormMismatch,

    #[error("matrix is not symmetric (residual {residual:.3e} exceeds tolerance)")]
    NotSymmetric { residual: f64 },

    #[error("restricted form is not positive definite (margin {margin:.3e})")]
    NotPositiveDefinite { margin: f64 },

    #[error("subspace is degenerate for the form (smallest |eigenvalue| {min_abs:.3e})")]
    DegenerateSubspace { min_abs: f64 },

    #[error("frame columns are not linearly independent (min singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("angle eigenvalue {sigma:.17e} fell below 1 beyond the clamp window ({deficit:.3e})")]
    AngleClampExceeded { sigma: f64, deficit: f64 },

    #[error("points coincide (distance {dist:.3e})")]
    CoincidentPoints { dist: f64 },

    #[error("angle spectra differ by {max_diff:.3e}, beyond tolerance {tol:.3e}")]
    SpectrumMismatch { max_diff: f64, tol: f64 },

    #[error("ambient dimension too small: needed {needed} independent directions, found {found}")]
    AmbientTooSmall { needed: usize, found: usize },

    #[error("solver did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("chain is not nested at index {index}")]
    NotNested { index: usize },

    #[error("convex set of kind {kind} is unbounded")]
    UnboundedSet { kind: &'static str },

    #[error("chain intersection appears non-empty: {detail}")]
    NonEmptyIntersection { detail: String },

    #[error("subspace is not totally isotropic (max Gram entry {residual:.3e})")]
    NotIsotropic { residual: f64 },

    #[error("flag subspaces are not strictly nested at level {level}")]
    FlagNotNested { level: usize },

    #[error("realified spectrum violates the multiplicity-{d} pattern (cluster width {width:.3e})")]
    MultiplicityPattern { d: usize, width: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("numerical check failed: {0}")]
    Numerics(String),
}
