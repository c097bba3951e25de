//! Composite Hamiltonians, dense Hermitian eigendecomposition and the
//! degeneracy diagnostics the equilibration results depend on.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::SpaceLayout;
use crate::linalg::{self, CMatrix, SplitMatrix, C64};
use crate::tolerances::Tolerances;

/// `H = H_S (x) 1 + 1 (x) H_B + H_SB` together with its parts.
#[derive(Debug, Clone)]
pub struct CompositeHamiltonian {
    layout: SpaceLayout,
    system: CMatrix,
    bath: CMatrix,
    interaction: CMatrix,
    total: CMatrix,
}

impl CompositeHamiltonian {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    /// `H_S`, `d_S x d_S`.
    pub fn system(&self) -> &CMatrix {
        &self.system
    }

    /// `H_B`, `d_B x d_B`.
    pub fn bath(&self) -> &CMatrix {
        &self.bath
    }

    /// `H_SB`, `d x d`.
    pub fn interaction(&self) -> &CMatrix {
        &self.interaction
    }

    /// The full `d x d` Hamiltonian.
    pub fn total(&self) -> &CMatrix {
        &self.total
    }
}

fn check_part(name: &str, m: &CMatrix, dim: usize, tol: &Tolerances) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    let deviation = linalg::hermitian_deviation(m);
    if deviation > tol.hamiltonian_hermitian {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Builds the dense total Hamiltonian in the system-slow layout.
pub fn assemble(
    system: CMatrix,
    bath: CMatrix,
    interaction: CMatrix,
    layout: &SpaceLayout,
    tol: &Tolerances,
) -> Result<CompositeHamiltonian> {
    check_part("H_S", &system, layout.d_system(), tol)?;
    check_part("H_B", &bath, layout.d_bath(), tol)?;
    check_part("H_SB", &interaction, layout.d(), tol)?;
    let id_s = CMatrix::identity(layout.d_system(), layout.d_system());
    let id_b = CMatrix::identity(layout.d_bath(), layout.d_bath());
    let mut total = linalg::kron(&system, &id_b) + linalg::kron(&id_s, &bath) + &interaction;
    // exact Hermiticity so the eigensolver sees a symmetric input
    linalg::hermitize(&mut total);
    Ok(CompositeHamiltonian {
        layout: *layout,
        system,
        bath,
        interaction,
        total,
    })
}

/// Ascending spectrum and orthonormal eigenvectors (columns) of a Hermitian
/// matrix. Each eigenvector's largest-magnitude component is real positive.
#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
    min_level_spacing: f64,
    min_gap_collision: Option<f64>,
    split: OnceLock<SplitMatrix>,
}

impl SpectralData {
    /// Wraps an eigensystem computed elsewhere. Levels are sorted ascending
    /// and phases fixed; the gap diagnostic is filled in when `d` is within
    /// `tol.gap_check_cap`.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: CMatrix, tol: &Tolerances) -> Result<Self> {
        let d = eigenvalues.len();
        if eigenvectors.nrows() != d || eigenvectors.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "{d} eigenvalues with a {}x{} eigenvector matrix",
                eigenvectors.nrows(),
                eigenvectors.ncols()
            )));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| eigenvalues[k]).collect();
        let mut vectors = CMatrix::from_fn(d, d, |i, j| eigenvectors[(i, order[j])]);
        linalg::fix_column_phases(&mut vectors);
        let min_level_spacing = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let min_gap_collision = if d <= tol.gap_check_cap {
            Some(min_gap_collision(&values))
        } else {
            None
        };
        Ok(Self {
            eigenvalues: values,
            eigenvectors: vectors,
            min_level_spacing,
            min_gap_collision,
            split: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `E_n`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are `Psi_n`.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// Amplitudes of `Psi_n`.
    pub fn eigenvector(&self, n: usize) -> &[C64] {
        let d = self.dim();
        &self.eigenvectors.as_slice()[n * d..(n + 1) * d]
    }

    pub(crate) fn split_eigenvectors(&self) -> &SplitMatrix {
        self.split.get_or_init(|| SplitMatrix::from_complex(&self.eigenvectors))
    }

    /// Operator norm `max |E_n|`.
    pub fn norm(&self) -> f64 {
        let lo = self.eigenvalues.first().copied().unwrap_or(0.0);
        let hi = self.eigenvalues.last().copied().unwrap_or(0.0);
        lo.abs().max(hi.abs())
    }

    /// Scale for relative tolerances: `|H|`, or 1 for the zero matrix.
    pub fn scale(&self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            n
        } else {
            1.0
        }
    }

    pub fn min_level_spacing(&self) -> f64 {
        self.min_level_spacing
    }

    /// Smallest distance between two distinct Bohr frequencies (or between a
    /// Bohr frequency and zero). `None` when `d` exceeded the gap-check cap.
    pub fn min_gap_collision(&self) -> Option<f64> {
        self.min_gap_collision
    }

    /// Largest `|H v_n - E_n v_n|` over columns.
    pub fn max_residual(&self, h: &CMatrix) -> f64 {
        let hv = h * &self.eigenvectors;
        (0..self.dim())
            .map(|n| {
                let e = C64::new(self.eigenvalues[n], 0.0);
                (hv.column(n) - self.eigenvectors.column(n) * e).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `max |V^dagger V - 1|`
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        let v = self.split_eigenvectors();
        let g = v.adjoint_mul(v).to_complex();
        linalg::max_abs(&(g - CMatrix::identity(d, d)))
    }

    /// `sum_n E_n |Psi_n><Psi_n|`
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.dim();
        let scaled = CMatrix::from_fn(d, d, |i, j| self.eigenvectors[(i, j)] * self.eigenvalues[j]);
        &scaled * self.eigenvectors.adjoint()
    }

    /// Indices grouped into runs whose consecutive spacing is `<= threshold`.
    pub fn degenerate_groups(&self, threshold: f64) -> Vec<Vec<usize>> {
        let mut groups = Vec::new();
        let mut current = vec![0];
        for n in 1..self.dim() {
            if self.eigenvalues[n] - self.eigenvalues[n - 1] <= threshold {
                current.push(n);
            } else {
                groups.push(std::mem::replace(&mut current, vec![n]));
            }
        }
        groups.push(current);
        groups
    }
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn eigendecompose(h: &CMatrix, tol: &Tolerances) -> Result<SpectralData> {
    let d = h.nrows();
    if d > tol.decomposition_cap {
        return Err(Error::CapExceeded {
            what: "dense eigendecomposition",
            dim: d,
            cap: tol.decomposition_cap,
        });
    }
    let deviation = linalg::hermitian_deviation(h);
    if deviation > tol.hamiltonian_hermitian {
        return Err(Error::NotHermitian { deviation });
    }
    let (values, vectors) = linalg::hermitian_eigen(h)?;
    SpectralData::from_parts(values, vectors, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCheck {
    pub nondegenerate: bool,
    pub min_level_spacing: f64,
    /// Threshold actually applied, `tol * |H|`.
    pub threshold: f64,
    /// First colliding pair of levels, if any.
    pub collision: Option<(usize, usize)>,
}

/// Nondegenerate iff every consecutive spacing exceeds `tol * |H|`.
pub fn check_nondegenerate_spectrum(spec: &SpectralData, tol: f64) -> SpectrumCheck {
    let threshold = tol * spec.scale();
    let e = spec.eigenvalues();
    let collision = (1..e.len()).find(|&n| e[n] - e[n - 1] <= threshold).map(|n| (n - 1, n));
    SpectrumCheck {
        nondegenerate: collision.is_none(),
        min_level_spacing: spec.min_level_spacing(),
        threshold,
        collision,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCheck {
    pub nondegenerate: bool,
    pub min_gap_collision: f64,
    pub threshold: f64,
}

/// All gaps `E_k - E_l`, `k > l`, sorted, with 0 prepended; returns the
/// smallest adjacent difference.
fn min_gap_collision(eigenvalues: &[f64]) -> f64 {
    let d = eigenvalues.len();
    let mut gaps = Vec::with_capacity(d * (d - 1) / 2 + 1);
    gaps.push(0.0);
    for k in 0..d {
        for l in 0..k {
            gaps.push(eigenvalues[k] - eigenvalues[l]);
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Nondegenerate gaps: `E_k - E_l = E_m - E_n` only for the trivial
/// identifications. Two gaps closer than `tol * |H|` count as equal.
pub fn check_nondegenerate_gaps(spec: &SpectralData, tol: f64, cap: usize) -> Result<GapCheck> {
    let d = spec.dim();
    if d > cap {
        return Err(Error::CapExceeded {
            what: "gap degeneracy check",
            dim: d,
            cap,
        });
    }
    let threshold = tol * spec.scale();
    let min = match spec.min_gap_collision() {
        Some(m) => m,
        None => min_gap_collision(spec.eigenvalues()),
    };
    Ok(GapCheck {
        nondegenerate: min > threshold,
        min_gap_collision: min,
        threshold,
    })
}
