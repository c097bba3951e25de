//! Eigenstate reductions `rho_n = tr_B |Psi_n><Psi_n|`, infinite-time
//! averages, the purity-weighted `delta`, exact bath averages and Gibbs fits.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{bloch_of_matrix, reduce_pair_to_system, BlochVector, DensityMatrix, Factor, PureState, SpaceLayout};
use crate::linalg::{self, CMatrix, SplitMatrix, C64};
use crate::sampling::SubspaceBasis;
use crate::spectral::SpectralData;
use crate::tolerances::Tolerances;
use crate::SCHEMA_VERSION;

/// What to do when the spectrum has (numerically) degenerate levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyPolicy {
    /// Fail with [`Error::DegenerateSpectrum`].
    #[default]
    Refuse,
    /// Keep the cross terms `c_n c_m^* rho_nm` inside each degenerate block,
    /// which is the exact infinite-time average for a degenerate spectrum.
    Symmetrize,
}

/// Levels closer than the degeneracy threshold, with their cross reductions.
#[derive(Debug, Clone)]
pub struct DegenerateBlock {
    pub levels: Vec<usize>,
    /// `(n, m, rho_nm)` for `n != m` in the block.
    pub pairs: Vec<(usize, usize, CMatrix)>,
}

#[derive(Debug, Clone)]
pub struct EigenstateReductions {
    layout: SpaceLayout,
    energies: Vec<f64>,
    rho: Vec<DensityMatrix>,
    bloch: Option<Vec<BlochVector>>,
    purity: Vec<f64>,
    blocks: Vec<DegenerateBlock>,
    min_level_spacing: f64,
    /// `rho_n` flattened row-major into the columns of a `d_S^2 x d` matrix.
    stacked: SplitMatrix,
}

impl EigenstateReductions {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn rho(&self) -> &[DensityMatrix] {
        &self.rho
    }

    /// `p_n`, present when `d_S = 2`.
    pub fn bloch(&self) -> Option<&[BlochVector]> {
        self.bloch.as_deref()
    }

    pub fn purity(&self) -> &[f64] {
        &self.purity
    }

    /// Groups of numerically degenerate levels; empty for a nondegenerate
    /// spectrum.
    pub fn degenerate_blocks(&self) -> &[DegenerateBlock] {
        &self.blocks
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn min_level_spacing(&self) -> f64 {
        self.min_level_spacing
    }

    /// Errors under [`DegeneracyPolicy::Refuse`] if any block exists.
    pub fn check_policy(&self, policy: DegeneracyPolicy) -> Result<()> {
        match (self.blocks.first(), policy) {
            (Some(b), DegeneracyPolicy::Refuse) => Err(Error::DegenerateSpectrum {
                levels: b.levels.clone(),
                spacing: self.min_level_spacing,
            }),
            _ => Ok(()),
        }
    }

    /// `(1/d) sum_n rho_n`, which equals `1/d_S` by completeness.
    pub fn mean_reduction(&self) -> CMatrix {
        let d = self.len() as f64;
        self.weighted_sum(&vec![1.0 / d; self.len()])
    }

    /// `sum_n w_n rho_n`
    pub fn weighted_sum(&self, weights: &[f64]) -> CMatrix {
        let ds = self.layout.d_system();
        let mut out = CMatrix::zeros(ds, ds);
        for (w, r) in weights.iter().zip(&self.rho) {
            out += r.matrix() * C64::new(*w, 0.0);
        }
        out
    }

    /// `sum_n W[n, k] rho_n` for every column `k` of a `d x m` weight matrix.
    pub(crate) fn weighted_sums(&self, weights: &DMatrix<f64>) -> Vec<CMatrix> {
        let ds = self.layout.d_system();
        let re = &self.stacked.re * weights;
        let im = &self.stacked.im * weights;
        (0..weights.ncols())
            .map(|k| CMatrix::from_fn(ds, ds, |i, j| C64::new(re[(i * ds + j, k)], im[(i * ds + j, k)])))
            .collect()
    }
}

fn stack(rho: &[DensityMatrix], ds: usize) -> SplitMatrix {
    let d = rho.len();
    let mut re = DMatrix::zeros(ds * ds, d);
    let mut im = DMatrix::zeros(ds * ds, d);
    for (n, r) in rho.iter().enumerate() {
        for i in 0..ds {
            for j in 0..ds {
                let z = r.matrix()[(i, j)];
                re[(i * ds + j, n)] = z.re;
                im[(i * ds + j, n)] = z.im;
            }
        }
    }
    SplitMatrix { re, im }
}

fn check_spectrum_layout(spec: &SpectralData, layout: &SpaceLayout) -> Result<()> {
    if spec.dim() != layout.d() {
        return Err(Error::DimensionMismatch(format!(
            "spectrum of dimension {} under layout {}x{}",
            spec.dim(),
            layout.d_system(),
            layout.d_bath()
        )));
    }
    Ok(())
}

/// `rho_n` for every eigenvector. Levels closer than `tol.spectrum * |H|`
/// are grouped into degenerate blocks whose cross reductions are kept.
pub fn eigenstate_reductions(spec: &SpectralData, layout: &SpaceLayout, tol: &Tolerances) -> Result<EigenstateReductions> {
    check_spectrum_layout(spec, layout)?;
    let ds = layout.d_system();
    let rho: Vec<DensityMatrix> = (0..spec.dim())
        .into_par_iter()
        .map(|n| {
            let v = spec.eigenvector(n);
            DensityMatrix::from_raw(Factor::System, reduce_pair_to_system(v, v, layout))
        })
        .collect();
    let purity = rho.iter().map(|r| r.purity()).collect();
    let bloch = (ds == 2).then(|| rho.iter().map(|r| bloch_of_matrix(r.matrix())).collect());
    let threshold = tol.spectrum * spec.scale();
    let blocks = spec
        .degenerate_groups(threshold)
        .into_iter()
        .filter(|g| g.len() > 1)
        .map(|levels| {
            let mut pairs = Vec::new();
            for &n in &levels {
                for &m in &levels {
                    if n != m {
                        pairs.push((n, m, reduction_pair(spec, layout, n, m)));
                    }
                }
            }
            DegenerateBlock { levels, pairs }
        })
        .collect();
    let stacked = stack(&rho, ds);
    Ok(EigenstateReductions {
        layout: *layout,
        energies: spec.eigenvalues().to_vec(),
        rho,
        bloch,
        purity,
        blocks,
        min_level_spacing: spec.min_level_spacing(),
        stacked,
    })
}

/// `rho_nm = tr_B |Psi_n><Psi_m|`
pub fn reduction_pair(spec: &SpectralData, layout: &SpaceLayout, n: usize, m: usize) -> CMatrix {
    reduce_pair_to_system(spec.eigenvector(n), spec.eigenvector(m), layout)
}

/// Expansion coefficients `c_n = <Psi_n|Psi(0)>`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCoefficients {
    pub c: Vec<C64>,
}

impl OverlapCoefficients {
    /// `|c_n|^2`
    pub fn weights(&self) -> Vec<f64> {
        self.c.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut s = linalg::CompensatedSum::default();
        self.c.iter().for_each(|z| s.add(z.norm_sqr()));
        s.value()
    }
}

pub fn overlaps(spec: &SpectralData, psi0: &PureState) -> Result<OverlapCoefficients> {
    if psi0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} against a spectrum of dimension {}",
            psi0.dim(),
            spec.dim()
        )));
    }
    let c = spec.eigenvectors().ad_mul(psi0.amplitudes());
    Ok(OverlapCoefficients { c: c.iter().copied().collect() })
}

/// `V^dagger X` for a `d x m` block of states, as split real matrices.
pub(crate) fn overlaps_block(spec: &SpectralData, states: &SplitMatrix) -> SplitMatrix {
    spec.split_eigenvectors().adjoint_mul(states)
}

/// `rho_bar = sum_n |c_n|^2 rho_n`, plus in-block cross terms under
/// [`DegeneracyPolicy::Symmetrize`].
pub fn time_averaged_state(
    c: &OverlapCoefficients,
    red: &EigenstateReductions,
    policy: DegeneracyPolicy,
) -> Result<DensityMatrix> {
    if c.c.len() != red.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} reductions",
            c.c.len(),
            red.len()
        )));
    }
    red.check_policy(policy)?;
    let mut out = red.weighted_sum(&c.weights());
    for block in &red.blocks {
        for (n, m, r) in &block.pairs {
            out += r * (c.c[*n] * c.c[*m].conj());
        }
    }
    linalg::hermitize(&mut out);
    Ok(DensityMatrix::from_raw(Factor::System, out))
}

/// `delta = sum_n <Psi_n|Pi_R|Psi_n> / d_R * tr(rho_n^2)`
pub fn delta(red: &EigenstateReductions, subspace: &SubspaceBasis, spec: &SpectralData) -> Result<f64> {
    if subspace.ambient_dim() != spec.dim() || red.len() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspace in dimension {} for a spectrum of dimension {}",
            subspace.ambient_dim(),
            spec.dim()
        )));
    }
    let weights = subspace.projection_weights(spec.eigenvectors());
    let d_r = subspace.dim() as f64;
    let mut s = linalg::CompensatedSum::default();
    for (w, p) in weights.iter().zip(red.purity()) {
        s.add(w / d_r * p);
    }
    Ok(s.value())
}

/// `<rho_bar>` over uniform states of the subspace `H_R`:
/// `sum_n <Psi_n|Pi_R|Psi_n> / d_R * rho_n` (plus in-block cross terms
/// under the override).
pub fn subspace_average(
    red: &EigenstateReductions,
    subspace: &SubspaceBasis,
    spec: &SpectralData,
    policy: DegeneracyPolicy,
) -> Result<CMatrix> {
    if subspace.ambient_dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspace in dimension {} for a spectrum of dimension {}",
            subspace.ambient_dim(),
            spec.dim()
        )));
    }
    red.check_policy(policy)?;
    let d_r = subspace.dim() as f64;
    let weights: Vec<f64> = subspace
        .projection_weights(spec.eigenvectors())
        .into_iter()
        .map(|w| w / d_r)
        .collect();
    let mut out = red.weighted_sum(&weights);
    if !red.blocks.is_empty() {
        let b = subspace.columns();
        for block in &red.blocks {
            for (n, m, r) in &block.pairs {
                // E[c_n c_m^*] = <Psi_n|Pi_R|Psi_m> / d_R
                let vn = nalgebra::DVectorView::from_slice(spec.eigenvector(*n), spec.dim());
                let vm = nalgebra::DVectorView::from_slice(spec.eigenvector(*m), spec.dim());
                let an = b.ad_mul(&vn);
                let am = b.ad_mul(&vm);
                out += r * (an.dotc(&am) / d_r);
            }
        }
    }
    linalg::hermitize(&mut out);
    Ok(out)
}

/// Closed-form average of `rho_bar[psi (x) Phi]` over uniform bath states:
/// `(1/d_B) sum_n <psi|rho_n|psi> rho_n`. The trace is checked against 1.
pub fn bath_averaged_equilibrium(
    psi: &PureState,
    red: &EigenstateReductions,
    policy: DegeneracyPolicy,
) -> Result<DensityMatrix> {
    let ds = red.layout.d_system();
    if psi.dim() != ds {
        return Err(Error::DimensionMismatch(format!(
            "system state of dimension {} for d_S = {ds}",
            psi.dim()
        )));
    }
    red.check_policy(policy)?;
    let db = red.layout.d_bath() as f64;
    let x = psi.amplitudes();
    let sandwich = |m: &CMatrix| x.dotc(&(m * x));
    let weights: Vec<f64> = red.rho.iter().map(|r| sandwich(r.matrix()).re / db).collect();
    let mut out = red.weighted_sum(&weights);
    for block in &red.blocks {
        for (n, m, r) in &block.pairs {
            // E[c_n c_m^*] = <psi|rho_mn|psi> / d_B
            let partner = block
                .pairs
                .iter()
                .find(|(a, b, _)| a == m && b == n)
                .map(|(_, _, r)| r)
                .expect("pairs hold both orders");
            out += r * (sandwich(partner) / db);
        }
    }
    linalg::hermitize(&mut out);
    let trace = linalg::trace(&out).re;
    let deviation = (trace - 1.0).abs();
    if deviation > 1e-10 {
        return Err(Error::Normalization { trace, deviation });
    }
    Ok(DensityMatrix::from_raw(Factor::System, out))
}

/// `<rho_bar>` over uniform product states of the whole space: `1/d_S`.
pub fn full_average(layout: &SpaceLayout) -> DensityMatrix {
    DensityMatrix::maximally_mixed(Factor::System, layout.d_system())
}

/// The linear map `psi -> <rho_bar>_{B_R}[psi]` for a bath subspace `B_R`,
/// stored as a `d_S^2 x d_S^2` kernel:
/// `<rho_bar>_{B_R}[psi] = (1/d_R) sum_n <psi|rho_n^R|psi> rho_n` with
/// `rho_n^R = tr_B((1 (x) Pi_R)|Psi_n><Psi_n|)`.
#[derive(Debug, Clone)]
pub struct BathAverageMap {
    d_system: usize,
    d_r: usize,
    kernel: CMatrix,
}

impl BathAverageMap {
    /// `B_R = B`.
    pub fn full(red: &EigenstateReductions, policy: DegeneracyPolicy) -> Result<Self> {
        red.check_policy(policy)?;
        let ds = red.layout.d_system();
        let mut left: Vec<&CMatrix> = red.rho.iter().map(|r| r.matrix()).collect();
        let mut right = left.clone();
        for block in &red.blocks {
            for (n, m, r) in &block.pairs {
                let partner = pair_lookup(block, *m, *n);
                left.push(r);
                right.push(partner);
            }
        }
        Ok(Self {
            d_system: ds,
            d_r: red.layout.d_bath(),
            kernel: kernel(&left, &right, ds),
        })
    }

    /// A proper bath subspace, given by an orthonormal basis of `B_R`.
    pub fn restricted(
        spec: &SpectralData,
        red: &EigenstateReductions,
        bath: &SubspaceBasis,
        policy: DegeneracyPolicy,
    ) -> Result<Self> {
        let layout = red.layout;
        check_spectrum_layout(spec, &layout)?;
        if bath.ambient_dim() != layout.d_bath() {
            return Err(Error::DimensionMismatch(format!(
                "bath subspace in dimension {} for d_B = {}",
                bath.ambient_dim(),
                layout.d_bath()
            )));
        }
        red.check_policy(policy)?;
        let (ds, db, d) = (layout.d_system(), layout.d_bath(), layout.d());
        // eigenvector amplitudes viewed as d_B x (d_S d) columns, one per (n, s)
        let y = SplitMatrix::from_complex(&CMatrix::from_column_slice(db, ds * d, spec.eigenvectors().as_slice()));
        let b = SplitMatrix::from_complex(&bath.columns());
        let projected = b.mul(&b.adjoint_mul(&y)).to_complex();
        let proj = projected.as_slice();
        let col = |n: usize| &proj[n * d..(n + 1) * d];
        let rho_r: Vec<CMatrix> = (0..d).map(|n| reduce_pair_to_system(col(n), col(n), &layout)).collect();
        let mut left: Vec<&CMatrix> = red.rho.iter().map(|r| r.matrix()).collect();
        let mut right: Vec<&CMatrix> = rho_r.iter().collect();
        let mut cross = Vec::new();
        for block in &red.blocks {
            for (n, m, r) in &block.pairs {
                cross.push((r, reduce_pair_to_system(col(*m), col(*n), &layout)));
            }
        }
        for (r, rr) in &cross {
            left.push(r);
            right.push(rr);
        }
        Ok(Self {
            d_system: ds,
            d_r: bath.dim(),
            kernel: kernel(&left, &right, ds),
        })
    }

    pub fn d_system(&self) -> usize {
        self.d_system
    }

    pub fn d_r(&self) -> usize {
        self.d_r
    }

    /// Image of an arbitrary system operator `P` (linear extension).
    pub fn apply(&self, p: &CMatrix) -> CMatrix {
        let ds = self.d_system;
        // out_kl = (1/d_R) sum_ij K[kl, ij] P[j, i]
        let q = nalgebra::DVector::from_fn(ds * ds, |ij, _| p[(ij % ds, ij / ds)]);
        let out = &self.kernel * q / C64::new(self.d_r as f64, 0.0);
        CMatrix::from_fn(ds, ds, |k, l| out[k * ds + l])
    }

    /// `<rho_bar>_{B_R}[psi]`
    pub fn average(&self, psi: &PureState) -> CMatrix {
        self.apply(&psi.projector())
    }

    /// `<rho_bar>_{S (x) B_R}`, the image of `1/d_S`.
    pub fn total_average(&self) -> CMatrix {
        let ds = self.d_system;
        self.apply(&(CMatrix::identity(ds, ds) / C64::new(ds as f64, 0.0)))
    }

    /// `|| <rho_bar>_{B_R}[psi] - <rho_bar>_{S (x) B_R} ||` for a unit vector.
    pub fn deviation(&self, psi: &[C64]) -> f64 {
        let ds = self.d_system;
        let x = nalgebra::DVector::from_column_slice(psi);
        let p = &x * x.adjoint() - CMatrix::identity(ds, ds) / C64::new(ds as f64, 0.0);
        crate::hilbert::trace_norm(&self.apply(&p))
    }

    /// For `d_S = 2`: the real 3x3 matrix `T` with
    /// `<rho_bar>_{B_R}[p0] - <rho_bar>_{S (x) B_R} = (T p0) . sigma / 2`.
    /// Its largest singular value is the supremum of [`Self::deviation`].
    pub fn bloch_matrix(&self) -> Option<nalgebra::Matrix3<f64>> {
        if self.d_system != 2 {
            return None;
        }
        let s = linalg::pauli();
        let mut t = nalgebra::Matrix3::zeros();
        for j in 0..3 {
            let image = self.apply(&s[j].map(|z| z * 0.5));
            let b = bloch_of_matrix(&image).to_array();
            for k in 0..3 {
                t[(k, j)] = b[k];
            }
        }
        Some(t)
    }
}

fn pair_lookup(block: &DegenerateBlock, n: usize, m: usize) -> &CMatrix {
    block
        .pairs
        .iter()
        .find(|(a, b, _)| *a == n && *b == m)
        .map(|(_, _, r)| r)
        .expect("pairs hold both orders")
}

/// `K[kl, ij] = sum_t left_t[k, l] right_t[i, j]`
fn kernel(left: &[&CMatrix], right: &[&CMatrix], ds: usize) -> CMatrix {
    let flat = |ms: &[&CMatrix]| {
        CMatrix::from_fn(ds * ds, ms.len(), |ij, t| ms[t][(ij / ds, ij % ds)])
    };
    let l = SplitMatrix::from_complex(&flat(left));
    let r = SplitMatrix::from_complex(&flat(right).transpose());
    l.mul(&r).to_complex()
}

/// Gibbs state `exp(-beta H) / Z` from the eigensystem of `H`.
fn gibbs(values: &[f64], vectors: &CMatrix, beta: f64) -> CMatrix {
    let shift = if beta >= 0.0 {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    let w: Vec<f64> = values.iter().map(|e| (-beta * (e - shift)).exp()).collect();
    let z: f64 = w.iter().sum();
    let n = values.len();
    let scaled = CMatrix::from_fn(n, n, |i, k| vectors[(i, k)] * (w[k] / z));
    &scaled * vectors.adjoint()
}

/// Best Gibbs approximation of one reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EthFit {
    pub beta: f64,
    /// Trace distance at the optimum.
    pub residual: f64,
    pub beta_max: f64,
}

const ETH_SCAN_POINTS: usize = 401;

/// Minimizes `|| rho - exp(-beta H_S)/Z ||` over `beta` in
/// `[-beta_max, beta_max]` by a coarse scan followed by golden-section
/// refinement to `1e-8` in `beta`. `beta_max` defaults to `50 / |H_S|`.
pub fn eth_fit(rho: &DensityMatrix, hs: &CMatrix, beta_max: Option<f64>) -> Result<EthFit> {
    if rho.dim() != hs.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "reduction of dimension {} against H_S of dimension {}",
            rho.dim(),
            hs.nrows()
        )));
    }
    let (values, vectors) = linalg::hermitian_eigen(hs)?;
    let norm = values.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if norm == 0.0 {
        return Err(Error::InvalidArgument("H_S = 0 has no temperature dependence".into()));
    }
    let beta_max = beta_max.unwrap_or(50.0 / norm);
    if !(beta_max > 0.0) {
        return Err(Error::InvalidArgument(format!("beta_max = {beta_max}")));
    }
    let f = |beta: f64| crate::hilbert::trace_norm(&(rho.matrix() - gibbs(&values, &vectors, beta)));

    let step = 2.0 * beta_max / (ETH_SCAN_POINTS - 1) as f64;
    let grid = |k: usize| -beta_max + k as f64 * step;
    let (mut best_k, mut best_f) = (0, f64::INFINITY);
    for k in 0..ETH_SCAN_POINTS {
        let v = f(grid(k));
        if v < best_f {
            best_k = k;
            best_f = v;
        }
    }
    let mut lo = grid(best_k.saturating_sub(1));
    let mut hi = grid((best_k + 1).min(ETH_SCAN_POINTS - 1));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-8 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut beta = 0.5 * (lo + hi);
    let mut residual = f(beta);
    // the scan optimum can beat the refined one when f is flat
    if best_f < residual {
        beta = grid(best_k);
        residual = best_f;
    }
    if beta_max - beta.abs() <= 1e-8 {
        return Err(Error::NonConvergentFit {
            lo: -beta_max,
            hi: beta_max,
            best: beta,
        });
    }
    Ok(EthFit { beta, residual, beta_max })
}

/// `n,energy,purity[,p_x,p_y,p_z]` with a `# schema_version` comment line.
pub fn reductions_csv(red: &EigenstateReductions) -> String {
    let mut out = format!("# schema_version={SCHEMA_VERSION}\n");
    match red.bloch() {
        Some(_) => out.push_str("n,energy,purity,p_x,p_y,p_z\n"),
        None => out.push_str("n,energy,purity\n"),
    }
    for n in 0..red.len() {
        let _ = write!(out, "{n},{},{}", red.energies[n], red.purity[n]);
        if let Some(p) = red.bloch() {
            let _ = write!(out, ",{},{},{}", p[n].x, p[n].y, p[n].z);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{partial_trace_bath, tensor_product, trace_distance};
    use crate::linalg::{pauli, ZERO};
    use crate::models::{analytic_eigensystem, random_commuting_spec};
    use crate::sampling::{sample_uniform_state, stream_rng};
    use crate::spectral::{assemble, eigendecompose};

    fn diag(values: &[f64]) -> CMatrix {
        let n = values.len();
        CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    fn random_setup(ds: usize, db: usize, seed: u64) -> (SpaceLayout, SpectralData, EigenstateReductions) {
        let tol = Tolerances::default();
        let layout = SpaceLayout::new(ds, db).unwrap();
        let h = crate::models::build_random_model(&layout, 1.0, &tol, &mut stream_rng(seed, 0)).unwrap();
        let spec = eigendecompose(h.total(), &tol).unwrap();
        let red = eigenstate_reductions(&spec, &layout, &tol).unwrap();
        (layout, spec, red)
    }

    #[test]
    fn decoupled_reductions_are_eigenprojectors() {
        let tol = Tolerances::default();
        let layout = SpaceLayout::new(3, 1).unwrap();
        let h = assemble(diag(&[0.0, 2.0, 1.0]), CMatrix::zeros(1, 1), CMatrix::zeros(3, 3), &layout, &tol).unwrap();
        let spec = eigendecompose(h.total(), &tol).unwrap();
        let red = eigenstate_reductions(&spec, &layout, &tol).unwrap();
        for (n, k) in [(0, 0), (1, 2), (2, 1)] {
            let mut e = CMatrix::zeros(3, 3);
            e[(k, k)] = C64::new(1.0, 0.0);
            assert!(linalg::max_abs(&(red.rho()[n].matrix() - e)) < 1e-14);
            assert!((red.purity()[n] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn completeness() {
        let (_, _, red) = random_setup(2, 8, 1);
        let dev = red.mean_reduction() - CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(linalg::max_abs(&dev) < 1e-10);
    }

    #[test]
    fn overlaps_examples() {
        let (layout, spec, red) = random_setup(2, 4, 2);
        let v = spec.eigenvector(3).to_vec();
        let psi = PureState::from_slice(Factor::Composite, &v).unwrap();
        let c = overlaps(&spec, &psi).unwrap();
        for (n, z) in c.c.iter().enumerate() {
            let expected = if n == 3 { 1.0 } else { 0.0 };
            assert!((z.norm() - expected).abs() < 1e-12);
        }
        let rho = time_averaged_state(&c, &red, DegeneracyPolicy::Refuse).unwrap();
        assert!(linalg::max_abs(&(rho.matrix() - red.rho()[3].matrix())) < 1e-12);

        let mix: Vec<C64> = spec.eigenvector(1).iter().zip(spec.eigenvector(2)).map(|(a, b)| a + b).collect();
        let psi = PureState::from_slice(Factor::Composite, &mix).unwrap();
        let w = overlaps(&spec, &psi).unwrap().weights();
        assert!((w[1] - 0.5).abs() < 1e-12 && (w[2] - 0.5).abs() < 1e-12);

        let mut rng = stream_rng(9, 0);
        let basis = SubspaceBasis::full(Factor::Composite, layout.d()).unwrap();
        let psi = sample_uniform_state(&basis, &mut rng);
        assert!((overlaps(&spec, &psi).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_give_maximally_mixed() {
        let (_, _, red) = random_setup(2, 4, 3);
        let d = red.len();
        let c = OverlapCoefficients { c: vec![C64::new((1.0 / d as f64).sqrt(), 0.0); d] };
        let rho = time_averaged_state(&c, &red, DegeneracyPolicy::Refuse).unwrap();
        assert!(linalg::max_abs(&(rho.matrix() - CMatrix::identity(2, 2) * C64::new(0.5, 0.0))) < 1e-10);
    }

    #[test]
    fn degenerate_spectrum_refused_then_symmetrized() {
        let tol = Tolerances::default();
        let layout = SpaceLayout::new(2, 2).unwrap();
        // H = H_S (x) 1: every level doubly degenerate
        let h = assemble(diag(&[0.0, 1.0]), CMatrix::zeros(2, 2), CMatrix::zeros(4, 4), &layout, &tol).unwrap();
        let spec = eigendecompose(h.total(), &tol).unwrap();
        let red = eigenstate_reductions(&spec, &layout, &tol).unwrap();
        assert!(!red.is_nondegenerate());
        let psi = PureState::from_slice(Factor::Composite, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), ZERO, ZERO]).unwrap();
        let c = overlaps(&spec, &psi).unwrap();
        assert!(matches!(
            time_averaged_state(&c, &red, DegeneracyPolicy::Refuse),
            Err(Error::DegenerateSpectrum { .. })
        ));
        // the state lies inside one eigenspace, so it is stationary
        let rho = time_averaged_state(&c, &red, DegeneracyPolicy::Symmetrize).unwrap();
        let direct = partial_trace_bath(&psi, &layout).unwrap();
        assert!(linalg::max_abs(&(rho.matrix() - direct.matrix())) < 1e-12);
    }

    #[test]
    fn delta_examples() {
        let tol = Tolerances::default();
        let mut rng = stream_rng(4, 0);
        let spec_model = random_commuting_spec(1.0, 8, 1.0, 1.0, &mut rng).unwrap();
        let layout = spec_model.layout();
        let spec = analytic_eigensystem(&spec_model, &tol).unwrap();
        let red = eigenstate_reductions(&spec, &layout, &tol).unwrap();
        let full = SubspaceBasis::full(Factor::Composite, layout.d()).unwrap();
        assert!((delta(&red, &full, &spec).unwrap() - 1.0).abs() < 1e-10);

        let (layout, spec, red) = random_setup(2, 4, 5);
        let psi = PureState::from_slice(Factor::Composite, spec.eigenvector(2)).unwrap();
        let one = SubspaceBasis::of_state(&psi);
        assert!((delta(&red, &one, &spec).unwrap() - red.purity()[2]).abs() < 1e-12);
        let full = SubspaceBasis::full(Factor::Composite, layout.d()).unwrap();
        let dl = delta(&red, &full, &spec).unwrap();
        assert!(dl >= 0.5 - 1e-12 && dl <= 1.0 + 1e-12);
    }

    #[test]
    fn bath_average_decoupled_dephases() {
        let tol = Tolerances::default();
        let layout = SpaceLayout::new(2, 1).unwrap();
        let h = assemble(pauli()[2].map(|z| z * 0.5), CMatrix::zeros(1, 1), CMatrix::zeros(2, 2), &layout, &tol).unwrap();
        let spec = eigendecompose(h.total(), &tol).unwrap();
        let red = eigenstate_reductions(&spec, &layout, &tol).unwrap();
        let psi = PureState::from_slice(Factor::System, &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let avg = bath_averaged_equilibrium(&psi, &red, DegeneracyPolicy::Refuse).unwrap();
        assert!(linalg::max_abs(&(avg.matrix() - diag(&[0.36, 0.64]))) < 1e-14);
    }

    #[test]
    fn bath_average_identity_over_orthonormal_bath_bases() {
        // (1/d_B) sum_l rho_bar[psi (x) Phi_l] equals the closed form for any basis
        let (layout, spec, red) = random_setup(2, 4, 6);
        let mut rng = stream_rng(6, 1);
        let sys = SubspaceBasis::full(Factor::System, 2).unwrap();
        let psi = sample_uniform_state(&sys, &mut rng);
        let u = crate::sampling::random_unitary(4, &mut rng);
        let mut acc = CMatrix::zeros(2, 2);
        for l in 0..4 {
            let phi = PureState::from_slice(Factor::Bath, u.column(l).as_slice()).unwrap();
            let c = overlaps(&spec, &tensor_product(&psi, &phi, &layout).unwrap()).unwrap();
            acc += time_averaged_state(&c, &red, DegeneracyPolicy::Refuse).unwrap().into_matrix() / C64::new(4.0, 0.0);
        }
        let closed = bath_averaged_equilibrium(&psi, &red, DegeneracyPolicy::Refuse).unwrap();
        assert!(linalg::max_abs(&(acc - closed.matrix())) < 1e-12);
        let map = BathAverageMap::full(&red, DegeneracyPolicy::Refuse).unwrap();
        assert!(linalg::max_abs(&(map.average(&psi) - closed.matrix())) < 1e-12);
    }

    #[test]
    fn restricted_map_reduces_to_full() {
        let (_, spec, red) = random_setup(2, 4, 7);
        let full = BathAverageMap::full(&red, DegeneracyPolicy::Refuse).unwrap();
        let basis = SubspaceBasis::new(Factor::Bath, CMatrix::identity(4, 4), &Tolerances::default()).unwrap();
        let restricted = BathAverageMap::restricted(&spec, &red, &basis, DegeneracyPolicy::Refuse).unwrap();
        assert!(linalg::max_abs(&(full.kernel.clone() - restricted.kernel.clone())) < 1e-12);
        assert!(linalg::max_abs(&(full.total_average() - CMatrix::identity(2, 2) * C64::new(0.5, 0.0))) < 1e-12);
    }

    #[test]
    fn bloch_matrix_is_average_outer_product() {
        let (_, _, red) = random_setup(2, 8, 8);
        let map = BathAverageMap::full(&red, DegeneracyPolicy::Refuse).unwrap();
        let t = map.bloch_matrix().unwrap();
        let d = red.len() as f64;
        let mut a = nalgebra::Matrix3::<f64>::zeros();
        for p in red.bloch().unwrap() {
            let v = nalgebra::Vector3::from(p.to_array());
            a += v * v.transpose() / d;
        }
        assert!((t - a).abs().max() < 1e-12);
    }

    #[test]
    fn eth_fit_examples() {
        let hs = diag(&[0.0, 1.0, 2.5]);
        let mixed = DensityMatrix::maximally_mixed(Factor::System, 3);
        let fit = eth_fit(&mixed, &hs, None).unwrap();
        assert!(fit.beta.abs() < 1e-7 && fit.residual < 1e-7);

        let (values, vectors) = linalg::hermitian_eigen(&hs).unwrap();
        let g = DensityMatrix::new(Factor::System, gibbs(&values, &vectors, 0.7), &Tolerances::default()).unwrap();
        let fit = eth_fit(&g, &hs, None).unwrap();
        assert!((fit.beta - 0.7).abs() < 1e-6, "{fit:?}");
        assert!(fit.residual < 1e-8);

        let negative = DensityMatrix::new(Factor::System, gibbs(&values, &vectors, -1.3), &Tolerances::default()).unwrap();
        assert!((eth_fit(&negative, &hs, None).unwrap().beta + 1.3).abs() < 1e-6);
    }

    #[test]
    fn eth_fit_pure_qubit_matches_scan() {
        // for a qubit the Gibbs family is p = (0, 0, -tanh(beta w / 2)),
        // so the optimal distance is the transverse length of p
        let hs = pauli()[2].map(|z| z * 0.5);
        let rho = crate::hilbert::density_from_bloch(
            &BlochVector::from_array([0.6, 0.0, 0.8]),
            &Tolerances::default(),
        )
        .unwrap();
        let fit = eth_fit(&rho, &hs, None).unwrap();
        assert!((fit.residual - 0.6).abs() < 1e-8, "{fit:?}");
        assert!((fit.beta - (-2.0 * 0.8f64.atanh())).abs() < 1e-6);
    }

    #[test]
    fn eth_fit_endpoint_is_reported() {
        let hs = pauli()[2].map(|z| z * 0.5);
        let ground = crate::hilbert::density_from_bloch(&BlochVector::from_array([0.0, 0.0, -1.0]), &Tolerances::default()).unwrap();
        assert!(matches!(eth_fit(&ground, &hs, Some(2.0)), Err(Error::NonConvergentFit { .. })));
    }

    #[test]
    fn time_average_matches_bath_average_trace_distance_scale() {
        let (layout, spec, red) = random_setup(2, 4, 10);
        let psi = PureState::basis(Factor::System, 2, 0).unwrap();
        let a = bath_averaged_equilibrium(&psi, &red, DegeneracyPolicy::Refuse).unwrap();
        let full = full_average(&layout);
        assert!(trace_distance(&a, &full).unwrap() <= 1.0);
        assert_eq!(spec.dim(), 8);
    }

    #[test]
    fn csv_layout() {
        let (_, _, red) = random_setup(2, 2, 11);
        let csv = reductions_csv(&red);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# schema_version=1");
        assert_eq!(lines[1], "n,energy,purity,p_x,p_y,p_z");
        assert_eq!(lines.len(), 2 + 4);
    }
}
