//! Exact finite-time evolution of the reduced state and time-averaged
//! equilibration metrics.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{time_averaged_state, DegeneracyPolicy, EigenstateReductions, OverlapCoefficients};
use crate::error::{Error, Result};
use crate::hilbert::{bloch_of_matrix, reduce_pair_to_system, trace_norm, DensityMatrix, Factor, PureState, SpaceLayout};
use crate::linalg::{self, CMatrix, CVector, CompensatedSum, SplitMatrix, C64};
use crate::sampling::Rng;
use crate::spectral::SpectralData;
use crate::SCHEMA_VERSION;

/// Largest `d` for which the `d^2` cross reductions `rho_nm` are cached;
/// the pair-cache route falls back to state vectors beyond it.
pub const PAIR_CACHE_LIMIT: usize = 512;

/// Number of times evolved per matrix product.
const TIME_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionRoute {
    /// The faster route for every size measured so far: state vector.
    #[default]
    Auto,
    /// `sum_nm c_n c_m^* e^{-i(E_n - E_m)t} rho_nm` from cached `rho_nm`.
    PairCache,
    /// `tr_B |Psi(t)><Psi(t)|` with `Psi(t)` evolved in the eigenbasis.
    StateVector,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    /// Mean over the sampled times.
    pub fn average(&self) -> Result<DensityMatrix> {
        let first = self
            .states
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
        let ds = first.dim();
        let n = self.states.len() as f64;
        let mut acc = vec![(CompensatedSum::default(), CompensatedSum::default()); ds * ds];
        for s in &self.states {
            for (k, z) in s.matrix().iter().enumerate() {
                acc[k].0.add(z.re);
                acc[k].1.add(z.im);
            }
        }
        let m = CMatrix::from_iterator(ds, ds, acc.iter().map(|(re, im)| C64::new(re.value() / n, im.value() / n)));
        Ok(DensityMatrix::from_raw(Factor::System, m))
    }

    /// `t,purity[,p_x,p_y,p_z]` with a `# schema_version` comment line.
    pub fn to_csv(&self) -> String {
        let qubit = self.states.first().is_some_and(|s| s.dim() == 2);
        let mut out = format!("# schema_version={SCHEMA_VERSION}\n");
        out.push_str(if qubit { "t,purity,p_x,p_y,p_z\n" } else { "t,purity\n" });
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t},{}", s.purity());
            if qubit {
                let p = bloch_of_matrix(s.matrix());
                let _ = write!(out, ",{},{},{}", p.x, p.y, p.z);
            }
            out.push('\n');
        }
        out
    }
}

/// `t_k = (k + u_k) T / n` with `u_k` uniform on `[0, 1)`: one time in each
/// of `n` equal strata of `[0, T)`.
pub fn stratified_times(t_max: f64, n: usize, rng: &mut Rng) -> Vec<f64> {
    let width = t_max / n as f64;
    (0..n).map(|k| (k as f64 + rng.random::<f64>()) * width).collect()
}

fn check_inputs(c: &OverlapCoefficients, spec: &SpectralData, layout: &SpaceLayout) -> Result<()> {
    if c.c.len() != spec.dim() || spec.dim() != layout.d() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients, spectrum of dimension {}, layout {}x{}",
            c.c.len(),
            spec.dim(),
            layout.d_system(),
            layout.d_bath()
        )));
    }
    Ok(())
}

/// `Psi(t) = sum_n c_n e^{-i E_n t} Psi_n`
pub fn evolve_state(c: &OverlapCoefficients, spec: &SpectralData, t: f64) -> PureState {
    let a = CVector::from_iterator(
        spec.dim(),
        c.c.iter().zip(spec.eigenvalues()).map(|(cn, e)| cn * C64::from_polar(1.0, -e * t)),
    );
    PureState::from_unit_vector(Factor::Composite, spec.eigenvectors() * a)
}

/// Calls `f(t, rho(t))` for each time, in order.
fn for_each_state<F: FnMut(f64, CMatrix)>(
    c: &OverlapCoefficients,
    spec: &SpectralData,
    layout: &SpaceLayout,
    times: &[f64],
    route: EvolutionRoute,
    mut f: F,
) {
    let d = spec.dim();
    let use_cache = match route {
        EvolutionRoute::Auto => false,
        EvolutionRoute::PairCache => d <= PAIR_CACHE_LIMIT,
        EvolutionRoute::StateVector => false,
    };
    let e = spec.eigenvalues();
    if use_cache {
        let ds = layout.d_system();
        let mut pairs = Vec::with_capacity(d * d);
        for n in 0..d {
            for m in 0..d {
                pairs.push(reduce_pair_to_system(spec.eigenvector(n), spec.eigenvector(m), layout));
            }
        }
        for &t in times {
            let a: Vec<C64> = (0..d).map(|n| c.c[n] * C64::from_polar(1.0, -e[n] * t)).collect();
            let mut rho = CMatrix::zeros(ds, ds);
            for n in 0..d {
                for m in 0..d {
                    rho += &pairs[n * d + m] * (a[n] * a[m].conj());
                }
            }
            linalg::hermitize(&mut rho);
            f(t, rho);
        }
        return;
    }
    let v = spec.split_eigenvectors();
    for chunk in times.chunks(TIME_CHUNK) {
        let m = chunk.len();
        let mut re = DMatrix::zeros(d, m);
        let mut im = DMatrix::zeros(d, m);
        for (k, &t) in chunk.iter().enumerate() {
            for n in 0..d {
                let z = c.c[n] * C64::from_polar(1.0, -e[n] * t);
                re[(n, k)] = z.re;
                im[(n, k)] = z.im;
            }
        }
        let psi = v.mul(&SplitMatrix { re, im });
        let mut column = vec![C64::new(0.0, 0.0); d];
        for (k, &t) in chunk.iter().enumerate() {
            for (i, slot) in column.iter_mut().enumerate() {
                *slot = C64::new(psi.re[(i, k)], psi.im[(i, k)]);
            }
            f(t, reduce_pair_to_system(&column, &column, layout));
        }
    }
}

/// `rho_S(t)` at the requested times.
pub fn evolve_reduced(
    c: &OverlapCoefficients,
    spec: &SpectralData,
    layout: &SpaceLayout,
    times: &[f64],
) -> Result<Trajectory> {
    evolve_reduced_with(c, spec, layout, times, EvolutionRoute::Auto)
}

pub fn evolve_reduced_with(
    c: &OverlapCoefficients,
    spec: &SpectralData,
    layout: &SpaceLayout,
    times: &[f64],
    route: EvolutionRoute,
) -> Result<Trajectory> {
    check_inputs(c, spec, layout)?;
    let mut states = Vec::with_capacity(times.len());
    for_each_state(c, spec, layout, times, route, |_, rho| {
        states.push(DensityMatrix::from_raw(Factor::System, rho));
    });
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

fn check_window(t_max: f64, n_times: usize, min_times: usize) -> Result<()> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("averaging window T = {t_max}")));
    }
    if n_times < min_times {
        return Err(Error::InvalidArgument(format!("n_times = {n_times}, need at least {min_times}")));
    }
    Ok(())
}

/// `(1/T) int_0^T || rho_S(t) - rho_bar || dt` estimated on `n_times`
/// stratified times.
#[allow(clippy::too_many_arguments)]
pub fn equilibration_metric(
    c: &OverlapCoefficients,
    spec: &SpectralData,
    red: &EigenstateReductions,
    layout: &SpaceLayout,
    t_max: f64,
    n_times: usize,
    rng: &mut Rng,
    policy: DegeneracyPolicy,
) -> Result<f64> {
    check_inputs(c, spec, layout)?;
    check_window(t_max, n_times, 100)?;
    let rho_bar = time_averaged_state(c, red, policy)?;
    let times = stratified_times(t_max, n_times, rng);
    let mut sum = CompensatedSum::default();
    for_each_state(c, spec, layout, &times, EvolutionRoute::Auto, |_, rho| {
        sum.add(trace_norm(&(rho - rho_bar.matrix())));
    });
    Ok(sum.value() / n_times as f64)
}

/// `(1/T) int_0^T rho_S(t) dt` estimated on `n_times` stratified times.
pub fn finite_time_average(
    c: &OverlapCoefficients,
    spec: &SpectralData,
    layout: &SpaceLayout,
    t_max: f64,
    n_times: usize,
    rng: &mut Rng,
) -> Result<DensityMatrix> {
    check_inputs(c, spec, layout)?;
    check_window(t_max, n_times, 1)?;
    let times = stratified_times(t_max, n_times, rng);
    let ds = layout.d_system();
    let mut acc = vec![(CompensatedSum::default(), CompensatedSum::default()); ds * ds];
    for_each_state(c, spec, layout, &times, EvolutionRoute::Auto, |_, rho| {
        for (k, z) in rho.iter().enumerate() {
            acc[k].0.add(z.re);
            acc[k].1.add(z.im);
        }
    });
    let n = n_times as f64;
    let m = CMatrix::from_iterator(ds, ds, acc.iter().map(|(re, im)| C64::new(re.value() / n, im.value() / n)));
    Ok(DensityMatrix::from_raw(Factor::System, m))
}

/// The exact integral `(1/T) int_0^T rho_S(t) dt`: each Bohr frequency
/// `w = E_n - E_m` contributes the factor `(1 - e^{-i w T}) / (i w T)`.
pub fn exact_finite_time_average(
    c: &OverlapCoefficients,
    spec: &SpectralData,
    layout: &SpaceLayout,
    t_max: f64,
) -> Result<DensityMatrix> {
    check_inputs(c, spec, layout)?;
    check_window(t_max, 1, 1)?;
    let d = spec.dim();
    let e = spec.eigenvalues();
    let factor = |w: f64| {
        let x = w * t_max;
        if x.abs() < 1e-8 {
            C64::new(1.0, -0.5 * x)
        } else {
            (C64::new(1.0, 0.0) - C64::from_polar(1.0, -x)) / C64::new(0.0, x)
        }
    };
    let dmat = CMatrix::from_fn(d, d, |n, m| c.c[n] * c.c[m].conj() * factor(e[n] - e[m]));
    let v = spec.split_eigenvectors();
    let composite = v.mul(&SplitMatrix::from_complex(&dmat));
    // (V D) V^dagger, then trace out the bath
    let full = composite.mul(&SplitMatrix {
        re: v.re.transpose(),
        im: -v.im.transpose(),
    });
    let mut rho = crate::hilbert::trace_out_bath(&full.to_complex(), layout)?;
    linalg::hermitize(&mut rho);
    Ok(DensityMatrix::from_raw(Factor::System, rho))
}
