//! Numerical thresholds shared by every module.

use serde::{Deserialize, Serialize};

/// All tolerances in one place. Relative thresholds are scaled by the
/// operator norm of the Hamiltonian they apply to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed deviation of a state norm from 1.
    pub norm: f64,
    /// Max elementwise |A - A^dagger| for density matrices.
    pub hermitian: f64,
    /// Allowed deviation of a density-matrix trace from 1.
    pub trace: f64,
    /// Eigenvalues of a density matrix may dip to `-psd`.
    pub psd: f64,
    /// Slack on |p| <= 1.
    pub bloch: f64,
    /// Max elementwise |B^dagger B - I| for subspace bases.
    pub orthonormal: f64,
    /// Max asymmetry accepted for Hamiltonian parts.
    pub hamiltonian_hermitian: f64,
    /// Level spacing below `spectrum * |H|` counts as degenerate.
    pub spectrum: f64,
    /// Gap coincidence below `gaps * |H|` counts as degenerate.
    pub gaps: f64,
    /// Largest d for the O(d^2) gap check.
    pub gap_check_cap: usize,
    /// Largest d accepted by the dense eigensolver.
    pub decomposition_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-12,
            hermitian: 1e-12,
            trace: 1e-12,
            psd: 1e-10,
            bloch: 1e-10,
            orthonormal: 1e-10,
            hamiltonian_hermitian: 1e-10,
            spectrum: 1e-10,
            gaps: 1e-9,
            gap_check_cap: 4096,
            decomposition_cap: 8192,
        }
    }
}
