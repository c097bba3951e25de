//! States, density matrices, tensor products and partial traces.
//!
//! Composite amplitudes are indexed `s * d_bath + b`: the system index is
//! the slow one. Every module relies on this layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::tolerances::Tolerances;

/// Dimensions of the system, the bath and their tensor product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceLayout {
    d_system: usize,
    d_bath: usize,
}

impl SpaceLayout {
    pub fn new(d_system: usize, d_bath: usize) -> Result<Self> {
        if d_system < 2 {
            return Err(Error::InvalidLayout(format!("d_S = {d_system}, need at least 2")));
        }
        if d_bath < 1 {
            return Err(Error::InvalidLayout("d_B = 0".into()));
        }
        d_system
            .checked_mul(d_bath)
            .ok_or_else(|| Error::InvalidLayout("d_S * d_B overflows".into()))?;
        Ok(Self { d_system, d_bath })
    }

    pub fn d_system(&self) -> usize {
        self.d_system
    }

    pub fn d_bath(&self) -> usize {
        self.d_bath
    }

    /// Composite dimension `d_S * d_B`.
    pub fn d(&self) -> usize {
        self.d_system * self.d_bath
    }

    pub fn dim_of(&self, factor: Factor) -> usize {
        match factor {
            Factor::System => self.d_system,
            Factor::Bath => self.d_bath,
            Factor::Composite => self.d(),
        }
    }

    /// Composite index of `|s>|b>`.
    #[inline]
    pub fn index(&self, s: usize, b: usize) -> usize {
        s * self.d_bath + b
    }
}

/// Which tensor factor a state lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    System,
    Bath,
    Composite,
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    factor: Factor,
    amplitudes: CVector,
}

impl PureState {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(factor: Factor, amplitudes: CVector, tol: &Tolerances) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol.norm {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { factor, amplitudes })
    }

    /// Normalizes `amplitudes`; fails only for the zero vector.
    pub fn normalized(factor: Factor, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            factor,
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    pub fn from_slice(factor: Factor, amplitudes: &[C64]) -> Result<Self> {
        Self::normalized(factor, CVector::from_column_slice(amplitudes))
    }

    /// Computational basis state `|k>`.
    pub fn basis(factor: Factor, dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::DimensionMismatch(format!("basis index {k} >= dimension {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        Ok(Self { factor, amplitudes: v })
    }

    pub(crate) fn from_unit_vector(factor: Factor, amplitudes: CVector) -> Self {
        Self { factor, amplitudes }
    }

    pub fn factor(&self) -> Factor {
        self.factor
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    /// `<self|other>`
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "inner product of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|psi><psi|`
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_raw(self.factor, self.projector())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    factor: Factor,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(factor: Factor, matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        let rho = Self { factor, matrix };
        rho.validate(tol)?;
        Ok(rho)
    }

    /// Skips validation; for results of operations that preserve the invariants.
    pub(crate) fn from_raw(factor: Factor, matrix: CMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self { factor, matrix }
    }

    pub fn maximally_mixed(factor: Factor, dim: usize) -> Self {
        Self::from_raw(factor, CMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0))
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        if !self.matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix of shape {}x{}",
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        let deviation = linalg::hermitian_deviation(&self.matrix);
        if deviation > tol.hermitian {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = linalg::trace(&self.matrix);
        if (trace.re - 1.0).abs() > tol.trace || trace.im.abs() > tol.trace {
            return Err(Error::BadTrace { trace: trace.re });
        }
        let min_eigenvalue = self.eigenvalues()[0];
        if min_eigenvalue < -tol.psd {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(())
    }

    pub fn factor(&self) -> Factor {
        self.factor
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    /// `tr(rho^2)`
    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `<psi|rho|psi>`
    pub fn expectation(&self, psi: &PureState) -> Result<f64> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of dimension {} against density matrix of dimension {}",
                psi.dim(),
                self.dim()
            )));
        }
        Ok(psi.amplitudes.dotc(&(&self.matrix * &psi.amplitudes)).re)
    }
}

/// Real polarization vector of a qubit, `rho = (1 + p.sigma) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64, tol: &Tolerances) -> Result<Self> {
        let p = Self { x, y, z };
        let length = p.norm();
        if !(length <= 1.0 + tol.bloch) {
            return Err(Error::BlochOutOfRange { length });
        }
        Ok(p)
    }

    pub fn from_array(p: [f64; 3]) -> Self {
        Self { x: p[0], y: p[1], z: p[2] }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// `psi (x) phi` with the system index slow.
pub fn tensor_product(psi: &PureState, phi: &PureState, layout: &SpaceLayout) -> Result<PureState> {
    if psi.dim() != layout.d_system() || phi.dim() != layout.d_bath() {
        return Err(Error::DimensionMismatch(format!(
            "tensor product of dimensions {} and {} under layout {}x{}",
            psi.dim(),
            phi.dim(),
            layout.d_system(),
            layout.d_bath()
        )));
    }
    let amplitudes = psi.amplitudes.kronecker(&phi.amplitudes);
    Ok(PureState::from_unit_vector(Factor::Composite, amplitudes))
}

/// Something over the composite space that can be reduced to one factor.
pub trait CompositeOperand {
    fn reduce_to_system(&self, layout: &SpaceLayout) -> Result<DensityMatrix>;
    fn reduce_to_bath(&self, layout: &SpaceLayout) -> Result<DensityMatrix>;
}

fn check_composite_dim(dim: usize, layout: &SpaceLayout) -> Result<()> {
    if dim != layout.d() {
        return Err(Error::InvalidLayout(format!(
            "operand of dimension {dim} does not match layout {}x{}",
            layout.d_system(),
            layout.d_bath()
        )));
    }
    Ok(())
}

impl CompositeOperand for PureState {
    fn reduce_to_system(&self, layout: &SpaceLayout) -> Result<DensityMatrix> {
        check_composite_dim(self.dim(), layout)?;
        let a = self.amplitudes.as_slice();
        Ok(DensityMatrix::from_raw(Factor::System, reduce_pair_to_system(a, a, layout)))
    }

    fn reduce_to_bath(&self, layout: &SpaceLayout) -> Result<DensityMatrix> {
        check_composite_dim(self.dim(), layout)?;
        let (ds, db) = (layout.d_system(), layout.d_bath());
        let a = self.amplitudes.as_slice();
        let mut out = CMatrix::zeros(db, db);
        for s in 0..ds {
            let block = &a[s * db..(s + 1) * db];
            for j in 0..db {
                let cj = block[j].conj();
                for i in 0..db {
                    out[(i, j)] += block[i] * cj;
                }
            }
        }
        Ok(DensityMatrix::from_raw(Factor::Bath, out))
    }
}

impl CompositeOperand for DensityMatrix {
    fn reduce_to_system(&self, layout: &SpaceLayout) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_raw(Factor::System, trace_out_bath(&self.matrix, layout)?))
    }

    fn reduce_to_bath(&self, layout: &SpaceLayout) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_raw(Factor::Bath, trace_out_system(&self.matrix, layout)?))
    }
}

/// Reduced state of the system, `tr_B`.
pub fn partial_trace_bath<T: CompositeOperand + ?Sized>(x: &T, layout: &SpaceLayout) -> Result<DensityMatrix> {
    x.reduce_to_system(layout)
}

/// Reduced state of the bath, `tr_S`.
pub fn partial_trace_system<T: CompositeOperand + ?Sized>(x: &T, layout: &SpaceLayout) -> Result<DensityMatrix> {
    x.reduce_to_bath(layout)
}

/// `tr_B X` for an arbitrary composite operator.
pub fn trace_out_bath(x: &CMatrix, layout: &SpaceLayout) -> Result<CMatrix> {
    check_composite_dim(x.nrows(), layout)?;
    check_composite_dim(x.ncols(), layout)?;
    let (ds, db) = (layout.d_system(), layout.d_bath());
    Ok(CMatrix::from_fn(ds, ds, |i, j| {
        (0..db).map(|b| x[(i * db + b, j * db + b)]).sum()
    }))
}

/// `tr_S X` for an arbitrary composite operator.
pub fn trace_out_system(x: &CMatrix, layout: &SpaceLayout) -> Result<CMatrix> {
    check_composite_dim(x.nrows(), layout)?;
    check_composite_dim(x.ncols(), layout)?;
    let (ds, db) = (layout.d_system(), layout.d_bath());
    Ok(CMatrix::from_fn(db, db, |a, b| {
        (0..ds).map(|s| x[(s * db + a, s * db + b)]).sum()
    }))
}

/// `tr_B |u><v|` for composite amplitude slices.
pub(crate) fn reduce_pair_to_system(u: &[C64], v: &[C64], layout: &SpaceLayout) -> CMatrix {
    let (ds, db) = (layout.d_system(), layout.d_bath());
    let mut out = CMatrix::from_element(ds, ds, ZERO);
    for i in 0..ds {
        let ui = &u[i * db..(i + 1) * db];
        for j in 0..ds {
            let vj = &v[j * db..(j + 1) * db];
            out[(i, j)] = ui.iter().zip(vj).map(|(a, b)| a * b.conj()).sum();
        }
    }
    out
}

/// `tr sqrt(A^2)` of a Hermitian matrix: the sum of absolute eigenvalues.
pub fn trace_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 2 {
        // closed form for 2x2 Hermitian
        let (p, q, b) = (a[(0, 0)].re, a[(1, 1)].re, a[(0, 1)]);
        let mean = 0.5 * (p + q);
        let radius = (0.25 * (p - q) * (p - q) + b.norm_sqr()).sqrt();
        return (mean + radius).abs() + (mean - radius).abs();
    }
    linalg::hermitian_eigenvalues(a).iter().map(|l| l.abs()).sum()
}

/// `||rho1 - rho2|| = tr sqrt((rho1 - rho2)^2)`, in `[0, 2]`.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between dimensions {} and {}",
            rho1.dim(),
            rho2.dim()
        )));
    }
    Ok(trace_norm(&(&rho1.matrix - &rho2.matrix)))
}

/// `tr(rho^2)`
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// `p = tr(rho sigma)` for a qubit.
pub fn bloch_vector(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "Bloch vector needs a 2x2 density matrix, got {}x{}",
            rho.dim(),
            rho.dim()
        )));
    }
    Ok(bloch_of_matrix(&rho.matrix))
}

pub(crate) fn bloch_of_matrix(m: &CMatrix) -> BlochVector {
    let off = m[(1, 0)];
    BlochVector {
        x: 2.0 * off.re,
        y: 2.0 * off.im,
        z: (m[(0, 0)] - m[(1, 1)]).re,
    }
}

/// `(1 + p.sigma) / 2`
pub fn density_from_bloch(p: &BlochVector, tol: &Tolerances) -> Result<DensityMatrix> {
    let length = p.norm();
    if !(length <= 1.0 + tol.bloch) {
        return Err(Error::BlochOutOfRange { length });
    }
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.5 * (1.0 + p.z), 0.0),
            C64::new(0.5 * p.x, -0.5 * p.y),
            C64::new(0.5 * p.x, 0.5 * p.y),
            C64::new(0.5 * (1.0 - p.z), 0.0),
        ],
    );
    Ok(DensityMatrix::from_raw(Factor::System, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn layout(ds: usize, db: usize) -> SpaceLayout {
        SpaceLayout::new(ds, db).unwrap()
    }

    #[test]
    fn layout_rejects_small_dims() {
        assert!(SpaceLayout::new(1, 4).is_err());
        assert!(SpaceLayout::new(2, 0).is_err());
        assert_eq!(layout(2, 3).d(), 6);
    }

    #[test]
    fn tensor_product_basis_states() {
        let l = layout(2, 2);
        let up = PureState::basis(Factor::System, 2, 0).unwrap();
        let b0 = PureState::basis(Factor::Bath, 2, 0).unwrap();
        let b1 = PureState::basis(Factor::Bath, 2, 1).unwrap();
        let out = tensor_product(&up, &b0, &l).unwrap();
        assert_eq!(out.amplitudes().as_slice(), &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let out = tensor_product(&up, &b1, &l).unwrap();
        assert_eq!(out.amplitudes().as_slice(), &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
    }

    #[test]
    fn tensor_product_hand_expanded() {
        let l = layout(2, 2);
        let psi = PureState::from_slice(Factor::System, &[c(1., 0.), c(1., 0.)]).unwrap();
        let phi = PureState::from_slice(Factor::Bath, &[c(1., 0.), c(0., 1.)]).unwrap();
        let out = tensor_product(&psi, &phi, &l).unwrap();
        let expected = [c(0.5, 0.), c(0., 0.5), c(0.5, 0.), c(0., 0.5)];
        for (a, b) in out.amplitudes().iter().zip(expected) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!((out.amplitudes().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tensor_product_dimension_mismatch() {
        let l = layout(2, 3);
        let psi = PureState::basis(Factor::System, 2, 0).unwrap();
        let phi = PureState::basis(Factor::Bath, 2, 0).unwrap();
        assert!(matches!(tensor_product(&psi, &phi, &l), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn bell_pair_reduces_to_maximally_mixed() {
        let l = layout(2, 2);
        let a = FRAC_1_SQRT_2;
        let bell = PureState::from_slice(Factor::Composite, &[c(a, 0.), c(0., 0.), c(0., 0.), c(a, 0.)]).unwrap();
        let half = DensityMatrix::maximally_mixed(Factor::System, 2);
        let rs = partial_trace_bath(&bell, &l).unwrap();
        let rb = partial_trace_system(&bell, &l).unwrap();
        assert!(trace_distance(&rs, &half).unwrap() < 1e-15);
        assert!(trace_distance(&rb, &half).unwrap() < 1e-15);
        // the density-matrix route agrees
        let rs2 = partial_trace_bath(&bell.density(), &l).unwrap();
        assert!(linalg::max_abs(&(rs2.matrix() - rs.matrix())) < 1e-15);
    }

    #[test]
    fn product_state_reduces_to_factors() {
        let l = layout(3, 2);
        let psi = PureState::from_slice(Factor::System, &[c(0.2, 0.1), c(-0.5, 0.3), c(0.4, -0.6)]).unwrap();
        let phi = PureState::from_slice(Factor::Bath, &[c(0.7, 0.0), c(0.1, -0.2)]).unwrap();
        let prod = tensor_product(&psi, &phi, &l).unwrap();
        let rs = partial_trace_bath(&prod, &l).unwrap();
        let rb = partial_trace_system(&prod, &l).unwrap();
        assert!(linalg::max_abs(&(rs.matrix() - psi.projector())) < 1e-15);
        assert!(linalg::max_abs(&(rb.matrix() - phi.projector())) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_wrong_layout() {
        let psi = PureState::basis(Factor::Composite, 6, 0).unwrap();
        assert!(matches!(partial_trace_bath(&psi, &layout(2, 2)), Err(Error::InvalidLayout(_))));
    }

    #[test]
    fn trace_distance_examples() {
        let up = PureState::basis(Factor::System, 2, 0).unwrap().density();
        let down = PureState::basis(Factor::System, 2, 1).unwrap().density();
        assert!((trace_distance(&up, &down).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(trace_distance(&up, &up).unwrap(), 0.0);
        let tol = Tolerances::default();
        let px = density_from_bloch(&BlochVector::new(1., 0., 0., &tol).unwrap(), &tol).unwrap();
        let py = density_from_bloch(&BlochVector::new(0., 1., 0., &tol).unwrap(), &tol).unwrap();
        assert!((trace_distance(&px, &py).unwrap() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn trace_norm_2x2_matches_eigen_route() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.), c(-0.2, 0.7), c(-0.2, -0.7), c(-0.9, 0.)]);
        let general: f64 = linalg::hermitian_eigenvalues(&m).iter().map(|l| l.abs()).sum();
        assert!((trace_norm(&m) - general).abs() < 1e-14);
    }

    #[test]
    fn purity_examples() {
        let tol = Tolerances::default();
        let psi = PureState::from_slice(Factor::System, &[c(0.6, 0.2), c(0.1, -0.3), c(0.5, 0.5)]).unwrap();
        assert!((purity(&psi.density()) - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(Factor::System, 5);
        assert!((purity(&mixed) - 0.2).abs() < 1e-15);
        let p = BlochVector::new(0.6, 0.0, 0.0, &tol).unwrap();
        assert!((purity(&density_from_bloch(&p, &tol).unwrap()) - 0.68).abs() < 1e-15);
    }

    #[test]
    fn bloch_examples() {
        let tol = Tolerances::default();
        let half = DensityMatrix::maximally_mixed(Factor::System, 2);
        assert_eq!(bloch_vector(&half).unwrap(), BlochVector::default());
        let up = PureState::basis(Factor::System, 2, 0).unwrap().density();
        assert_eq!(bloch_vector(&up).unwrap(), BlochVector { x: 0., y: 0., z: 1. });
        let p = BlochVector::new(0.3, -0.4, 0.5, &tol).unwrap();
        let back = bloch_vector(&density_from_bloch(&p, &tol).unwrap()).unwrap();
        assert!(back.distance(&p) < 1e-14);
        assert!(BlochVector::new(0.8, 0.8, 0.0, &tol).is_err());
        let too_long = BlochVector { x: 1.0, y: 0.5, z: 0.0 };
        assert!(matches!(density_from_bloch(&too_long, &tol), Err(Error::BlochOutOfRange { .. })));
    }

    #[test]
    fn bloch_matches_pauli_expectations() {
        let psi = PureState::from_slice(Factor::System, &[c(0.3, 0.4), c(-0.5, 0.2)]).unwrap();
        let rho = psi.density();
        let p = bloch_vector(&rho).unwrap();
        let expect: Vec<f64> = linalg::pauli()
            .iter()
            .map(|s| linalg::trace(&(rho.matrix() * s)).re)
            .collect();
        assert!((p.x - expect[0]).abs() < 1e-15);
        assert!((p.y - expect[1]).abs() < 1e-15);
        assert!((p.z - expect[2]).abs() < 1e-15);
    }

    #[test]
    fn density_validation() {
        let tol = Tolerances::default();
        let bad_trace = CMatrix::identity(2, 2);
        assert!(matches!(DensityMatrix::new(Factor::System, bad_trace, &tol), Err(Error::BadTrace { .. })));
        let not_herm = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0.1, 0.), c(0.2, 0.), c(0.5, 0.)]);
        assert!(matches!(DensityMatrix::new(Factor::System, not_herm, &tol), Err(Error::NotHermitian { .. })));
        let negative = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.), c(0., 0.), c(0., 0.), c(-0.5, 0.)]);
        assert!(matches!(DensityMatrix::new(Factor::System, negative, &tol), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn unnormalized_state_rejected() {
        let tol = Tolerances::default();
        let v = CVector::from_column_slice(&[c(1.0, 0.0), c(1e-3, 0.0)]);
        assert!(matches!(PureState::new(Factor::System, v, &tol), Err(Error::NotNormalized { .. })));
        assert!(PureState::normalized(Factor::System, CVector::zeros(3)).is_err());
    }
}
