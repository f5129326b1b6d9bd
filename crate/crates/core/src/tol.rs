//! Central numeric tolerances. Every guard threshold used across the crate
//! lives here so that no module carries ad-hoc magic numbers.

/// Tolerance knobs shared by all modules.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative edge guard: a spike estimate is declared subcritical when
    /// `d - sqrt(y)` (or `x - lambda_plus`) falls below `edge_guard_rel * lambda_plus`.
    pub edge_guard_rel: f64,
    /// PSD floor: a symmetric matrix passes the positive semi-definite check
    /// when its smallest eigenvalue is at least `-psd_floor_rel * trace`.
    pub psd_floor_rel: f64,
    /// Orthonormality tolerance for direction/basis matrices.
    pub orthonormal_tol: f64,
    /// Unit-norm tolerance for projection directions.
    pub unit_norm_tol: f64,
    /// Relative symmetry tolerance for matrices fed to the eigensolver.
    pub symmetry_tol: f64,
    /// Exponent in the small-separation diagnostics (`epsilon_0` of the
    /// separation checks); "any small fixed constant" made concrete.
    pub separation_exponent: f64,
    /// Multiplier in the automatic eigenvalue grouping rule.
    pub gap_factor: f64,
    /// Extra `N^{delta_gap}` slack in the automatic grouping rule.
    pub gap_delta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            edge_guard_rel: 1e-9,
            psd_floor_rel: 1e-8,
            orthonormal_tol: 1e-8,
            unit_norm_tol: 1e-8,
            symmetry_tol: 1e-10,
            separation_exponent: 0.05,
            gap_factor: 3.0,
            gap_delta: 0.1,
        }
    }
}

impl Tolerances {
    /// Absolute edge guard for a given upper spectral edge.
    pub fn edge_guard(&self, lambda_plus: f64) -> f64 {
        self.edge_guard_rel * lambda_plus
    }
}
