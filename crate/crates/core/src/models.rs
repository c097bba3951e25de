//! Benchmark Hamiltonians: the commuting spin-bath model with its closed-form
//! eigensystem, the dephasing bath of independent spins, and a Gaussian
//! random ensemble for contrast.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::SpaceLayout;
use crate::linalg::{pauli, CMatrix, C64, ZERO};
use crate::sampling::Rng;
use crate::spectral::{assemble, CompositeHamiltonian, SpectralData};
use crate::tolerances::Tolerances;

/// `H = (omega/2) sigma_z + 1/2 sum_a sigma_a (x) V_a + H_B` with `V_a` and
/// `H_B` diagonal in the bath basis: `V_a = diag(v[l][a])`,
/// `H_B = diag(bath_energies)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutingModelSpec {
    pub omega: f64,
    /// Rows `(v_lx, v_ly, v_lz)`.
    pub v: Vec<[f64; 3]>,
    pub bath_energies: Vec<f64>,
}

impl CommutingModelSpec {
    pub fn new(omega: f64, v: Vec<[f64; 3]>, bath_energies: Vec<f64>) -> Result<Self> {
        let spec = Self { omega, v, bath_energies };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.is_empty() {
            return Err(Error::InvalidModel("empty bath".into()));
        }
        if self.v.len() != self.bath_energies.len() {
            return Err(Error::InvalidModel(format!(
                "{} coupling rows but {} bath energies",
                self.v.len(),
                self.bath_energies.len()
            )));
        }
        let finite = self.omega.is_finite()
            && self.v.iter().flatten().all(|x| x.is_finite())
            && self.bath_energies.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if self.v.iter().all(|r| r[0] == 0.0 && r[1] == 0.0) {
            return Err(Error::InvalidModel("V_x and V_y both vanish".into()));
        }
        Ok(())
    }

    pub fn d_bath(&self) -> usize {
        self.v.len()
    }

    pub fn layout(&self) -> SpaceLayout {
        SpaceLayout::new(2, self.d_bath()).expect("d_B >= 1 after validation")
    }

    /// `V_x, V_y, V_z` and `H_B` as dense `d_B x d_B` matrices.
    pub fn bath_operators(&self) -> ([CMatrix; 3], CMatrix) {
        let db = self.d_bath();
        let diag = |f: &dyn Fn(usize) -> f64| {
            CMatrix::from_fn(db, db, |i, j| if i == j { C64::new(f(i), 0.0) } else { ZERO })
        };
        let v = [
            diag(&|l| self.v[l][0]),
            diag(&|l| self.v[l][1]),
            diag(&|l| self.v[l][2]),
        ];
        (v, diag(&|l| self.bath_energies[l]))
    }
}

/// Draws `v_la` and `E_l^B` independently and uniformly from
/// `[-coupling_scale, coupling_scale]` and `[-energy_scale, energy_scale]`.
pub fn random_commuting_spec(
    omega: f64,
    d_bath: usize,
    coupling_scale: f64,
    energy_scale: f64,
    rng: &mut Rng,
) -> Result<CommutingModelSpec> {
    let v = (0..d_bath)
        .map(|_| {
            [
                rng.random_range(-1.0..=1.0) * coupling_scale,
                rng.random_range(-1.0..=1.0) * coupling_scale,
                rng.random_range(-1.0..=1.0) * coupling_scale,
            ]
        })
        .collect();
    let e = (0..d_bath).map(|_| rng.random_range(-1.0..=1.0) * energy_scale).collect();
    CommutingModelSpec::new(omega, v, e)
}

fn check_layout(spec: &CommutingModelSpec, layout: &SpaceLayout) -> Result<()> {
    if layout.d_system() != 2 || layout.d_bath() != spec.d_bath() {
        return Err(Error::DimensionMismatch(format!(
            "commuting model with d_B = {} under layout {}x{}",
            spec.d_bath(),
            layout.d_system(),
            layout.d_bath()
        )));
    }
    Ok(())
}

pub fn build_commuting_model(
    spec: &CommutingModelSpec,
    layout: &SpaceLayout,
    tol: &Tolerances,
) -> Result<CompositeHamiltonian> {
    spec.validate()?;
    check_layout(spec, layout)?;
    let s = pauli();
    let hs = s[2].map(|z| z * (0.5 * spec.omega));
    let (v, hb) = spec.bath_operators();
    let d = layout.d();
    let mut hsb = CMatrix::zeros(d, d);
    for a in 0..3 {
        hsb += s[a].kronecker(&v[a]).map(|z| z * 0.5);
    }
    assemble(hs, hb, hsb, layout, tol)
}

/// Eigenvector of `[[a, b], [conj(b), -a]]` for eigenvalue `sign * r`.
fn qubit_eigenvector(a: f64, b: C64, r: f64, sign: f64) -> [C64; 2] {
    if r == 0.0 {
        return if sign > 0.0 {
            [C64::new(1.0, 0.0), ZERO]
        } else {
            [ZERO, C64::new(1.0, 0.0)]
        };
    }
    let lambda = sign * r;
    // two null vectors of M - lambda; the longer one is better conditioned
    let u = [b, C64::new(lambda - a, 0.0)];
    let w = [C64::new(lambda + a, 0.0), b.conj()];
    let nu = u[0].norm_sqr() + u[1].norm_sqr();
    let nw = w[0].norm_sqr() + w[1].norm_sqr();
    let (x, n) = if nu >= nw { (u, nu.sqrt()) } else { (w, nw.sqrt()) };
    [x[0] / n, x[1] / n]
}

/// Closed-form eigensystem: `Psi_{l+-} = psi_{l+-} (x) Phi_l` with
/// `E_{l+-} = E_l^B +- sqrt((omega + v_lz)^2 + v_lx^2 + v_ly^2) / 2`.
pub fn analytic_eigensystem(spec: &CommutingModelSpec, tol: &Tolerances) -> Result<SpectralData> {
    spec.validate()?;
    let layout = spec.layout();
    let db = spec.d_bath();
    let d = layout.d();
    if d > tol.decomposition_cap {
        return Err(Error::CapExceeded {
            what: "commuting model eigensystem",
            dim: d,
            cap: tol.decomposition_cap,
        });
    }
    let mut values = Vec::with_capacity(d);
    let mut vectors = CMatrix::zeros(d, d);
    for l in 0..db {
        let [vx, vy, vz] = spec.v[l];
        let a = spec.omega + vz;
        let b = C64::new(vx, -vy);
        let r = (a * a + b.norm_sqr()).sqrt();
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let col = 2 * l + k;
            let psi = qubit_eigenvector(a, b, r, sign);
            vectors[(layout.index(0, l), col)] = psi[0];
            vectors[(layout.index(1, l), col)] = psi[1];
            values.push(spec.bath_energies[l] + 0.5 * sign * r);
        }
    }
    SpectralData::from_parts(values, vectors, tol)
}

/// Dephasing bath of `n_spins` independent spins:
/// `V_x = sum_k g_k sigma_z^(k)`, `H_B = sum_k eps_k sigma_z^(k)`, so
/// `v_lx = sum_k g_k s_k(l)` and `E_l^B = sum_k eps_k s_k(l)` with
/// `s_k(l) = +1` when bit `n-1-k` of `l` is clear (spin 0 is the most
/// significant bit) and `-1` otherwise.
pub fn build_cucchietti_bath(
    couplings: &[f64],
    bath_fields: &[f64],
    omega: f64,
    tol: &Tolerances,
) -> Result<CommutingModelSpec> {
    let n = couplings.len();
    if n == 0 {
        return Err(Error::InvalidModel("need at least one bath spin".into()));
    }
    if bath_fields.len() != n {
        return Err(Error::InvalidModel(format!("{n} couplings but {} bath fields", bath_fields.len())));
    }
    let max_spins = (tol.decomposition_cap / 2).max(1).ilog2() as usize;
    if n > max_spins {
        return Err(Error::CapExceeded {
            what: "spin bath",
            dim: 2usize.saturating_pow(n.min(63) as u32 + 1),
            cap: tol.decomposition_cap,
        });
    }
    let db = 1usize << n;
    let sign = |k: usize, l: usize| if (l >> (n - 1 - k)) & 1 == 0 { 1.0 } else { -1.0 };
    let v = (0..db)
        .map(|l| [(0..n).map(|k| couplings[k] * sign(k, l)).sum(), 0.0, 0.0])
        .collect();
    let e = (0..db).map(|l| (0..n).map(|k| bath_fields[k] * sign(k, l)).sum()).collect();
    CommutingModelSpec::new(omega, v, e)
}

/// [`build_cucchietti_bath`] with `g_k` and `eps_k` drawn uniformly from
/// `[-coupling_scale, coupling_scale]` and `[-field_scale, field_scale]`.
pub fn random_cucchietti_bath(
    n_spins: usize,
    omega: f64,
    coupling_scale: f64,
    field_scale: f64,
    tol: &Tolerances,
    rng: &mut Rng,
) -> Result<CommutingModelSpec> {
    let g: Vec<f64> = (0..n_spins).map(|_| rng.random_range(-1.0..=1.0) * coupling_scale).collect();
    let e: Vec<f64> = (0..n_spins).map(|_| rng.random_range(-1.0..=1.0) * field_scale).collect();
    build_cucchietti_bath(&g, &e, omega, tol)
}

fn gaussian_hermitian(n: usize, rng: &mut Rng) -> CMatrix {
    // off-diagonal E|h_ij|^2 = 1/n, diagonal variance 1/n
    let s = (1.0 / n as f64).sqrt();
    let mut h = CMatrix::zeros(n, n);
    for j in 0..n {
        let x: f64 = StandardNormal.sample(rng);
        h[(j, j)] = C64::new(s * x, 0.0);
        for i in 0..j {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let z = C64::new(re, im) * (s * std::f64::consts::FRAC_1_SQRT_2);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// `H_S`, `H_B`, `H_SB` independent Gaussian Hermitian matrices with entry
/// variance `1/dim` of their own space; `H_SB` is multiplied by
/// `interaction_strength`.
pub fn build_random_model(
    layout: &SpaceLayout,
    interaction_strength: f64,
    tol: &Tolerances,
    rng: &mut Rng,
) -> Result<CompositeHamiltonian> {
    if !interaction_strength.is_finite() {
        return Err(Error::InvalidModel("non-finite interaction strength".into()));
    }
    if layout.d() > tol.decomposition_cap {
        return Err(Error::CapExceeded {
            what: "random model",
            dim: layout.d(),
            cap: tol.decomposition_cap,
        });
    }
    let hs = gaussian_hermitian(layout.d_system(), rng);
    let hb = gaussian_hermitian(layout.d_bath(), rng);
    let hsb = gaussian_hermitian(layout.d(), rng).map(|z| z * interaction_strength);
    assemble(hs, hb, hsb, layout, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::sampling::stream_rng;
    use crate::spectral::eigendecompose;

    #[test]
    fn single_level_example() {
        let tol = Tolerances::default();
        let spec = CommutingModelSpec::new(1.0, vec![[1.0, 0.0, 0.0]], vec![0.0]).unwrap();
        let h = build_commuting_model(&spec, &spec.layout(), &tol).unwrap();
        let [x, _, z] = pauli();
        assert!(max_abs(&(h.total() - (x + z).map(|c| c * 0.5))) < 1e-15);
        let a = analytic_eigensystem(&spec, &tol).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a.eigenvalues()[0] + s).abs() < 1e-15);
        assert!((a.eigenvalues()[1] - s).abs() < 1e-15);
    }

    #[test]
    fn shifted_level() {
        let tol = Tolerances::default();
        let spec = CommutingModelSpec::new(1.0, vec![[1.0, 0.0, 0.0]], vec![2.0]).unwrap();
        let a = analytic_eigensystem(&spec, &tol).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a.eigenvalues()[0] - (2.0 - s)).abs() < 1e-15);
        assert!((a.eigenvalues()[1] - (2.0 + s)).abs() < 1e-15);
    }

    #[test]
    fn decoupled_qubit_eigenvectors() {
        // the validity rule forbids v = 0, so check the 2x2 solver directly
        let up = qubit_eigenvector(1.0, ZERO, 1.0, 1.0);
        let down = qubit_eigenvector(1.0, ZERO, 1.0, -1.0);
        assert_eq!((up[0].norm(), up[1].norm()), (1.0, 0.0));
        assert_eq!((down[0].norm(), down[1].norm()), (0.0, 1.0));
    }

    #[test]
    fn qubit_eigenvectors_solve_block() {
        for &(a, b) in &[(0.3, C64::new(0.2, -0.7)), (-2.0, C64::new(1e-9, 0.0)), (0.0, C64::new(0.0, 1.0))] {
            let r: f64 = (a * a + b.norm_sqr()).sqrt();
            let m = CMatrix::from_row_slice(2, 2, &[C64::new(a, 0.0), b, b.conj(), C64::new(-a, 0.0)]);
            for sign in [1.0, -1.0] {
                let v = qubit_eigenvector(a, b, r, sign);
                let x = nalgebra::DVector::from_column_slice(&v);
                assert!((&m * &x - &x * C64::new(sign * r, 0.0)).norm() < 1e-14);
                assert!((x.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(CommutingModelSpec::new(1.0, vec![[0.0, 0.0, 1.0]], vec![0.0]).is_err());
        assert!(CommutingModelSpec::new(1.0, vec![[1.0, 0.0, 0.0]], vec![]).is_err());
        assert!(CommutingModelSpec::new(f64::NAN, vec![[1.0, 0.0, 0.0]], vec![0.0]).is_err());
    }

    #[test]
    fn cucchietti_signs() {
        let tol = Tolerances::default();
        let one = build_cucchietti_bath(&[1.0], &[0.0], 1.0, &tol).unwrap();
        assert_eq!(one.v, vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
        assert_eq!(one.bath_energies, vec![0.0, 0.0]);
        let two = build_cucchietti_bath(&[1.0, 2.0], &[0.0, 0.0], 1.0, &tol).unwrap();
        let vx: Vec<f64> = two.v.iter().map(|r| r[0]).collect();
        assert_eq!(vx, vec![3.0, -1.0, 1.0, -3.0]);
    }

    #[test]
    fn commutators_vanish_and_system_energy_not_conserved() {
        let tol = Tolerances::default();
        let mut rng = stream_rng(5, 0);
        let spec = random_commuting_spec(1.0, 8, 1.0, 1.0, &mut rng).unwrap();
        let (v, hb) = spec.bath_operators();
        for a in 0..3 {
            assert_eq!(max_abs(&(&v[a] * &hb - &hb * &v[a])), 0.0);
            for b in 0..3 {
                assert_eq!(max_abs(&(&v[a] * &v[b] - &v[b] * &v[a])), 0.0);
            }
        }
        let h = build_commuting_model(&spec, &spec.layout(), &tol).unwrap();
        let hs_full = h.system().kronecker(&CMatrix::identity(8, 8));
        let comm = &hs_full * h.interaction() - h.interaction() * &hs_full;
        assert!(max_abs(&comm) > 1e-3);
    }

    #[test]
    fn analytic_matches_dense() {
        let tol = Tolerances::default();
        let mut rng = stream_rng(11, 0);
        let spec = random_commuting_spec(0.8, 16, 1.0, 1.0, &mut rng).unwrap();
        let h = build_commuting_model(&spec, &spec.layout(), &tol).unwrap();
        let dense = eigendecompose(h.total(), &tol).unwrap();
        let exact = analytic_eigensystem(&spec, &tol).unwrap();
        let scale = dense.norm();
        for (a, b) in dense.eigenvalues().iter().zip(exact.eigenvalues()) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
        assert!(exact.max_residual(h.total()) < 1e-12 * scale);
        assert!(exact.unitarity_deviation() < 1e-14);
    }

    #[test]
    fn random_model_is_hermitian_and_reproducible() {
        let tol = Tolerances::default();
        let layout = SpaceLayout::new(2, 4).unwrap();
        let a = build_random_model(&layout, 1.0, &tol, &mut stream_rng(3, 0)).unwrap();
        let b = build_random_model(&layout, 1.0, &tol, &mut stream_rng(3, 0)).unwrap();
        assert_eq!(a.total(), b.total());
        assert_eq!(crate::linalg::hermitian_deviation(a.total()), 0.0);
        let zero = build_random_model(&layout, 0.0, &tol, &mut stream_rng(3, 0)).unwrap();
        assert_eq!(max_abs(zero.interaction()), 0.0);
    }
}
