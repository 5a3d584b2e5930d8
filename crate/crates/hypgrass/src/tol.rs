//! Tolerance profiles.
//!
//! One coherent knob for the whole library: angle tolerances are in radians,
//! distance tolerances are in the sqrt(2)-normalized metric. Three presets
//! (`strict`, `default`, `loose`) scale the verification thresholds; the
//! structural constants (clamp window, iteration caps) stay put unless a
//! preset overrides them explicitly.

/// Tolerances used across the library.
#[derive(Debug, Clone)]
pub struct TolProfile {
    /// Margin for positive-definiteness, relative to the largest |eigenvalue|.
    pub pd_margin: f64,
    /// Symmetry residual accepted when a symmetric matrix is expected.
    pub sym: f64,
    /// Window below 1 inside which angle eigenvalues are clamped to 1.
    pub clamp: f64,
    /// Hyperbolic angles below this are treated as zero when building charts.
    pub angle_zero: f64,
    /// Frame/subspace residual for equality checks.
    pub frame: f64,
    /// Residual accepted for `M^T Phi M - Phi`.
    pub isometry: f64,
    /// Spectrum agreement required by the Witt construction.
    pub spectrum_match: f64,
    /// Projection solvers stop when the step falls below this.
    pub solver_step: f64,
    /// Circumcenter solver stops when the max-distance improvement falls below this.
    pub solver_improve: f64,
    /// Iteration cap for iterative solvers.
    pub max_iters: usize,
    /// Convergence flag threshold for Busemann extrapolation.
    pub busemann: f64,
    /// Drift accepted when re-basing a ray.
    pub drift: f64,
    /// Default slack added to the Jung bound.
    pub jung_delta: f64,
    /// Cluster width for realified multiplicity grouping.
    pub cluster: f64,
}

impl TolProfile {
    pub const fn default_profile() -> Self {
        TolProfile {
            pd_margin: 1e-10,
            sym: 1e-10,
            clamp: 1e-8,
            angle_zero: 1e-7,
            frame: 1e-8,
            isometry: 1e-8,
            spectrum_match: 1e-6,
            solver_step: 1e-9,
            solver_improve: 1e-8,
            max_iters: 10_000,
            busemann: 1e-6,
            drift: 1e-6,
            jung_delta: 0.05,
            cluster: 1e-7,
        }
    }

    pub fn strict() -> Self {
        let mut t = Self::default_profile();
        t.frame = 1e-10;
        t.isometry = 1e-10;
        t.spectrum_match = 1e-8;
        t.solver_step = 1e-11;
        t.solver_improve = 1e-10;
        t.busemann = 1e-8;
        t.drift = 1e-8;
        t
    }

    pub fn loose() -> Self {
        let mut t = Self::default_profile();
        t.frame = 1e-6;
        t.isometry = 1e-6;
        t.spectrum_match = 1e-4;
        t.solver_step = 1e-7;
        t.solver_improve = 1e-6;
        t.busemann = 1e-4;
        t.drift = 1e-4;
        t.cluster = 1e-5;
        t
    }

    /// Look a profile up by name (`strict`, `default`, `loose`).
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "strict" => Some(Self::strict()),
            "default" => Some(Self::default_profile()),
            "loose" => Some(Self::loose()),
            _ => None,
        }
    }
}

impl Default for TolProfile {
    fn default() -> Self {
        Self::default_profile()
    }
}
