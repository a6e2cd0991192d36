//! Numerical tolerances shared by every module.
//!
//! One record holds every threshold so stress tests and the command line can
//! tighten or loosen them in a single place.

use serde::{Deserialize, Serialize};

/// Default cap on any dense matrix dimension.
pub const DEFAULT_DIM_CAP: usize = 1 << 14;

/// Default cap on the full ancilla–system–bath dimension `2^(N+2)` used by the
/// brute-force engine (`N ≤ 10`).
pub const DEFAULT_ORACLE_DIM_CAP: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed `‖H − H†‖_max / max(1, ‖H‖_max)` on eigensolver input.
    pub hermitian_input: f64,
    /// Eigen-reconstruction and eigenvector orthonormality residual.
    pub eigen_residual: f64,
    /// `‖U†U − I‖_max` for every unitary produced.
    pub unitary: f64,
    /// Trace, Hermiticity and positivity slack for density matrices.
    pub state: f64,
    /// Eigenvalues below `-pt_negative` count as negative when checking the
    /// single-negative-eigenvalue property of partial transposes.
    pub pt_negative: f64,
    /// Allowed deviation of sector weights from unit sum.
    pub weights: f64,
    /// Relative target for numerical quadrature.
    pub quadrature_rel: f64,
    /// Minimum rise of `E(t)` counted as a revival.
    pub revival: f64,
    /// Step-halving acceptance: max change of `E(t)` between slicings.
    pub halving: f64,
    /// Upper bound on slices per sample interval during step halving.
    pub max_slices_per_sample: usize,
    /// Generic dense dimension cap.
    pub dim_cap: usize,
    /// Cap on `2^(N+2)` for the brute-force engine.
    pub oracle_dim_cap: usize,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian_input: 1e-12,
        eigen_residual: 1e-10,
        unitary: 1e-10,
        state: 1e-10,
        pt_negative: 1e-9,
        weights: 1e-10,
        quadrature_rel: 1e-10,
        revival: 1e-7,
        halving: 1e-6,
        max_slices_per_sample: 1 << 12,
        dim_cap: DEFAULT_DIM_CAP,
        oracle_dim_cap: DEFAULT_ORACLE_DIM_CAP,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
