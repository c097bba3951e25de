//! Haar-uniform pure states on subspaces and seeded Monte Carlo averages.
//!
//! Every random draw comes from a ChaCha8 stream selected by `(seed, stream)`.
//! A Monte Carlo run with `n` samples over `S` streams gives stream `k` a fixed
//! share of the samples, so results depend only on `(seed, S, n)` and not on
//! thread scheduling.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{tensor_product, Factor, PureState, SpaceLayout};
use crate::linalg::{self, CMatrix, CVector, CompensatedSum, SplitMatrix, C64};
use crate::tolerances::Tolerances;

pub type Rng = ChaCha8Rng;

/// The RNG for one stream of a seeded run.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for an independent sub-experiment `tag` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    stream_rng(seed, u64::MAX - tag).random()
}

/// Orthonormal basis of a subspace `H_R`, stored as the columns of a
/// `d x d_R` matrix.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    factor: Factor,
    ambient: usize,
    repr: BasisRepr,
}

#[derive(Debug, Clone)]
enum BasisRepr {
    /// The whole space, identity columns.
    Full,
    Columns(CMatrix),
}

impl SubspaceBasis {
    pub fn new(factor: Factor, columns: CMatrix, tol: &Tolerances) -> Result<Self> {
        if columns.ncols() == 0 {
            return Err(Error::EmptySubspace);
        }
        if columns.ncols() > columns.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} basis vectors in a space of dimension {}",
                columns.ncols(),
                columns.nrows()
            )));
        }
        let gram = columns.adjoint() * &columns;
        let deviation = linalg::max_abs(&(gram - CMatrix::identity(columns.ncols(), columns.ncols())));
        if deviation > tol.orthonormal {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self {
            factor,
            ambient: columns.nrows(),
            repr: BasisRepr::Columns(columns),
        })
    }

    /// The whole space of dimension `dim`.
    pub fn full(factor: Factor, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptySubspace);
        }
        Ok(Self {
            factor,
            ambient: dim,
            repr: BasisRepr::Full,
        })
    }

    /// Span of the first `d_r` computational basis vectors of a space of
    /// dimension `dim`.
    pub fn leading(factor: Factor, dim: usize, d_r: usize) -> Result<Self> {
        if d_r == 0 {
            return Err(Error::EmptySubspace);
        }
        if d_r > dim {
            return Err(Error::DimensionMismatch(format!("d_R = {d_r} > dimension {dim}")));
        }
        if d_r == dim {
            return Self::full(factor, dim);
        }
        Ok(Self {
            factor,
            ambient: dim,
            repr: BasisRepr::Columns(CMatrix::identity(dim, d_r)),
        })
    }

    /// The one-dimensional span of `state`.
    pub fn of_state(state: &PureState) -> Self {
        Self {
            factor: state.factor(),
            ambient: state.dim(),
            repr: BasisRepr::Columns(CMatrix::from_column_slice(state.dim(), 1, state.amplitudes().as_slice())),
        }
    }

    /// `psi (x) B_R` inside the composite space.
    pub fn product(psi: &PureState, bath: &SubspaceBasis, layout: &SpaceLayout) -> Result<Self> {
        if psi.dim() != layout.d_system() || bath.ambient != layout.d_bath() {
            return Err(Error::DimensionMismatch(format!(
                "product subspace of dimensions {} and {} under layout {}x{}",
                psi.dim(),
                bath.ambient,
                layout.d_system(),
                layout.d_bath()
            )));
        }
        let bath_cols = bath.columns();
        let psi_col = CMatrix::from_column_slice(psi.dim(), 1, psi.amplitudes().as_slice());
        Ok(Self {
            factor: Factor::Composite,
            ambient: layout.d(),
            repr: BasisRepr::Columns(psi_col.kronecker(&bath_cols)),
        })
    }

    pub fn factor(&self) -> Factor {
        self.factor
    }

    /// Dimension of the space the subspace sits in.
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    /// `d_R`
    pub fn dim(&self) -> usize {
        match &self.repr {
            BasisRepr::Full => self.ambient,
            BasisRepr::Columns(c) => c.ncols(),
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self.repr, BasisRepr::Full)
    }

    /// Basis vectors as columns (materializes the identity for full spaces).
    pub fn columns(&self) -> CMatrix {
        match &self.repr {
            BasisRepr::Full => CMatrix::identity(self.ambient, self.ambient),
            BasisRepr::Columns(c) => c.clone(),
        }
    }

    /// `<v|Pi_R|v>` for each column `v` of `vectors`.
    pub fn projection_weights(&self, vectors: &CMatrix) -> Vec<f64> {
        match &self.repr {
            BasisRepr::Full => vectors.column_iter().map(|c| c.norm_squared()).collect(),
            BasisRepr::Columns(b) => {
                let coeffs = SplitMatrix::from_complex(b).adjoint_mul(&SplitMatrix::from_complex(vectors));
                (0..vectors.ncols())
                    .map(|j| {
                        coeffs.re.column(j).norm_squared() + coeffs.im.column(j).norm_squared()
                    })
                    .collect()
            }
        }
    }

    /// Maps coordinates in the subspace to a vector of the ambient space.
    fn embed(&self, coords: CVector) -> CVector {
        match &self.repr {
            BasisRepr::Full => coords,
            BasisRepr::Columns(b) => b * coords,
        }
    }

    /// Maps a `d_R x m` block of coordinates to `d x m`.
    fn embed_block(&self, coords: CMatrix) -> CMatrix {
        match &self.repr {
            BasisRepr::Full => coords,
            BasisRepr::Columns(b) => SplitMatrix::from_complex(b)
                .mul(&SplitMatrix::from_complex(&coords))
                .to_complex(),
        }
    }
}

fn gaussian_coordinates(dim: usize, rng: &mut Rng) -> CVector {
    CVector::from_fn(dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// A state drawn from the unitarily invariant measure on the span of `basis`:
/// `2 d_R` independent standard normals form complex coordinates, which are
/// normalized and mapped through the basis.
pub fn sample_uniform_state(basis: &SubspaceBasis, rng: &mut Rng) -> PureState {
    let mut coords = gaussian_coordinates(basis.dim(), rng);
    let norm = coords.norm();
    coords.unscale_mut(norm);
    PureState::from_unit_vector(basis.factor, basis.embed(coords))
}

/// `m` uniform states as the columns of a `d x m` matrix. Consumes the RNG
/// exactly like `m` calls to [`sample_uniform_state`].
pub fn sample_uniform_block(basis: &SubspaceBasis, m: usize, rng: &mut Rng) -> CMatrix {
    let d_r = basis.dim();
    let mut coords = CMatrix::zeros(d_r, m);
    for mut col in coords.column_iter_mut() {
        let mut z = gaussian_coordinates(d_r, rng);
        let norm = z.norm();
        z.unscale_mut(norm);
        col.copy_from(&z);
    }
    basis.embed_block(coords)
}

/// `psi (x) phi` with both factors drawn independently.
pub fn sample_product_state(
    system: &SubspaceBasis,
    bath: &SubspaceBasis,
    layout: &SpaceLayout,
    rng: &mut Rng,
) -> Result<PureState> {
    let psi = sample_uniform_state(system, rng);
    let phi = sample_uniform_state(bath, rng);
    tensor_product(&psi, &phi, layout)
}

/// How a Monte Carlo run is split into independent RNG streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPlan {
    pub seed: u64,
    pub n_streams: u64,
}

impl StreamPlan {
    pub fn new(seed: u64, n_streams: u64) -> Self {
        Self {
            seed,
            n_streams: n_streams.max(1),
        }
    }

    /// Number of samples stream `k` draws out of `n`.
    pub fn share(&self, k: u64, n: usize) -> usize {
        let s = self.n_streams as usize;
        n / s + usize::from((k as usize) < n % s)
    }
}

/// A value whose mean and elementwise spread can be estimated.
pub trait Observable: Sized + Send {
    fn width(&self) -> usize;
    fn write_flat(&self, out: &mut Vec<f64>);
    fn from_flat(flat: &[f64], template: &Self) -> Self;
}

impl Observable for f64 {
    fn width(&self) -> usize {
        1
    }
    fn write_flat(&self, out: &mut Vec<f64>) {
        out.push(*self);
    }
    fn from_flat(flat: &[f64], _: &Self) -> Self {
        flat[0]
    }
}

impl Observable for Vec<f64> {
    fn width(&self) -> usize {
        self.len()
    }
    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }
    fn from_flat(flat: &[f64], _: &Self) -> Self {
        flat.to_vec()
    }
}

/// Real and imaginary parts are estimated separately; the standard error
/// of a complex entry is stored as `se(re) + i se(im)`.
impl Observable for CMatrix {
    fn width(&self) -> usize {
        2 * self.len()
    }
    fn write_flat(&self, out: &mut Vec<f64>) {
        for z in self.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    fn from_flat(flat: &[f64], template: &Self) -> Self {
        CMatrix::from_iterator(
            template.nrows(),
            template.ncols(),
            flat.chunks_exact(2).map(|p| C64::new(p[0], p[1])),
        )
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloEstimate<T> {
    pub mean: T,
    pub standard_error: T,
    pub n_samples: usize,
    pub seed: u64,
    pub n_streams: u64,
}

impl MonteCarloEstimate<CMatrix> {
    /// Scalar uncertainty of the mean in trace distance: `sqrt(dim)` times the
    /// Frobenius norm of the elementwise standard errors, which bounds the
    /// trace norm of a matrix with those entries.
    pub fn trace_distance_se(&self) -> f64 {
        let frob: f64 = self
            .standard_error
            .iter()
            .map(|z| z.re * z.re + z.im * z.im)
            .sum::<f64>()
            .sqrt();
        (self.mean.nrows() as f64).sqrt() * frob
    }

    /// True when every entry of `reference` lies within `k` standard errors
    /// of the mean (real and imaginary parts separately). Entries with zero
    /// spread must match to `floor`.
    pub fn contains(&self, reference: &CMatrix, k: f64, floor: f64) -> bool {
        self.mean
            .iter()
            .zip(self.standard_error.iter())
            .zip(reference.iter())
            .all(|((m, se), r)| {
                (m.re - r.re).abs() <= k * se.re + floor && (m.im - r.im).abs() <= k * se.im + floor
            })
    }
}

/// Partial sums of one stream, mergeable in any order.
#[derive(Debug, Clone, Default)]
pub(crate) struct Moments {
    count: usize,
    sum: Vec<CompensatedSum>,
    sum_sq: Vec<CompensatedSum>,
}

impl Moments {
    fn push(&mut self, flat: &[f64]) {
        if self.sum.is_empty() {
            self.sum = vec![CompensatedSum::default(); flat.len()];
            self.sum_sq = vec![CompensatedSum::default(); flat.len()];
        }
        for (k, &x) in flat.iter().enumerate() {
            self.sum[k].add(x);
            self.sum_sq[k].add(x * x);
        }
        self.count += 1;
    }

    pub(crate) fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        for k in 0..self.sum.len() {
            self.sum[k].merge(&other.sum[k]);
            self.sum_sq[k].merge(&other.sum_sq[k]);
        }
        self.count += other.count;
    }

    /// Mean and standard error of the mean, elementwise.
    pub(crate) fn finish(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.count as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s.value() / n).collect();
        let se = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = ((sq.value() - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect();
        (mean, se)
    }
}

const BLOCK: usize = 256;

/// Monte Carlo average where the sampler produces a block of observations at
/// once. `batch(rng, m)` must return exactly `m` values.
pub fn monte_carlo_batched<T, F>(n: usize, plan: StreamPlan, batch: F) -> Result<MonteCarloEstimate<T>>
where
    T: Observable,
    F: Fn(&mut Rng, usize) -> Vec<T> + Sync,
{
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let per_stream: Vec<Result<(Moments, Option<T>)>> = (0..plan.n_streams)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(plan.seed, k);
            let mut moments = Moments::default();
            let mut template = None;
            let mut flat = Vec::new();
            let mut remaining = plan.share(k, n);
            let mut index = 0usize;
            while remaining > 0 {
                let m = remaining.min(BLOCK);
                for value in batch(&mut rng, m) {
                    flat.clear();
                    value.write_flat(&mut flat);
                    if flat.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite { stream: k, sample: index });
                    }
                    moments.push(&flat);
                    template.get_or_insert(value);
                    index += 1;
                }
                remaining -= m;
            }
            Ok((moments, template))
        })
        .collect();

    let mut total = Moments::default();
    let mut template = None;
    for part in per_stream {
        let (m, t) = part?;
        total.merge(&m);
        if template.is_none() {
            template = t;
        }
    }
    let template = template.expect("n >= 2 samples were drawn");
    let (mean, se) = total.finish();
    Ok(MonteCarloEstimate {
        mean: T::from_flat(&mean, &template),
        standard_error: T::from_flat(&se, &template),
        n_samples: total.count,
        seed: plan.seed,
        n_streams: plan.n_streams,
    })
}

/// Sample mean and standard error of `functional(sampler(rng))`.
pub fn monte_carlo_average<S, T, F, G>(functional: F, sampler: G, n: usize, plan: StreamPlan) -> Result<MonteCarloEstimate<T>>
where
    T: Observable,
    F: Fn(&S) -> T + Sync,
    G: Fn(&mut Rng) -> S + Sync,
{
    monte_carlo_batched(n, plan, |rng, m| (0..m).map(|_| functional(&sampler(rng))).collect())
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and the uniform distribution on `[0, 1]`.
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// A Haar-random unitary of size `n` (QR of a complex Ginibre matrix with
/// the phases of `R`'s diagonal divided out).
pub fn random_unitary(n: usize, rng: &mut Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::partial_trace_bath;

    #[test]
    fn one_dimensional_subspace_returns_its_vector() {
        let phi = PureState::from_slice(Factor::Bath, &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let basis = SubspaceBasis::of_state(&phi);
        let mut rng = stream_rng(7, 0);
        for _ in 0..10 {
            let out = sample_uniform_state(&basis, &mut rng);
            assert!((phi.inner(&out).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_validation() {
        let tol = Tolerances::default();
        let bad = CMatrix::from_element(3, 2, C64::new(0.5, 0.0));
        assert!(matches!(SubspaceBasis::new(Factor::Composite, bad, &tol), Err(Error::NotOrthonormal { .. })));
        assert!(matches!(SubspaceBasis::new(Factor::Composite, CMatrix::zeros(3, 0), &tol), Err(Error::EmptySubspace)));
        assert!(SubspaceBasis::leading(Factor::Bath, 4, 0).is_err());
    }

    #[test]
    fn qubit_overlap_is_uniform() {
        let basis = SubspaceBasis::full(Factor::System, 2).unwrap();
        let mut rng = stream_rng(11, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_uniform_state(&basis, &mut rng).amplitudes()[0].norm_sqr())
            .collect();
        let ks = ks_uniform(&xs);
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn mean_overlap_is_one_over_dimension() {
        let tol = Tolerances::default();
        let mut rng = stream_rng(3, 9);
        let u = random_unitary(12, &mut rng);
        let basis = SubspaceBasis::new(Factor::Composite, u.columns(0, 8).into_owned(), &tol).unwrap();
        let first = basis.columns().column(0).into_owned();
        let est = monte_carlo_average(
            |psi: &PureState| psi.amplitudes().dotc(&first).norm_sqr(),
            |rng| sample_uniform_state(&basis, rng),
            20_000,
            StreamPlan::new(5, 4),
        )
        .unwrap();
        assert!((est.mean - 0.125).abs() < 3.0 * est.standard_error, "{} +- {}", est.mean, est.standard_error);
    }

    #[test]
    fn constant_functional_has_zero_error() {
        let basis = SubspaceBasis::full(Factor::System, 3).unwrap();
        let est = monte_carlo_average(|_: &PureState| 1.0, |rng| sample_uniform_state(&basis, rng), 100, StreamPlan::new(1, 3)).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.standard_error, 0.0);
        assert_eq!(est.n_samples, 100);
    }

    #[test]
    fn too_few_samples_and_non_finite() {
        let basis = SubspaceBasis::full(Factor::System, 2).unwrap();
        let sampler = |rng: &mut Rng| sample_uniform_state(&basis, rng);
        assert!(matches!(monte_carlo_average(|_: &PureState| 1.0, sampler, 1, StreamPlan::new(0, 1)), Err(Error::TooFewSamples(1))));
        let r = monte_carlo_average(|_: &PureState| f64::NAN, sampler, 10, StreamPlan::new(0, 2));
        assert!(matches!(r, Err(Error::NonFinite { stream: 0, sample: 0 })));
    }

    #[test]
    fn reduced_state_of_full_space_average_is_maximally_mixed() {
        let layout = SpaceLayout::new(2, 4).unwrap();
        let basis = SubspaceBasis::full(Factor::Composite, layout.d()).unwrap();
        let est = monte_carlo_average(
            |psi: &PureState| partial_trace_bath(psi, &layout).unwrap().into_matrix(),
            |rng| sample_uniform_state(&basis, rng),
            10_000,
            StreamPlan::new(42, 4),
        )
        .unwrap();
        let half = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(est.contains(&half, 3.0, 1e-12), "{}", est.mean);
    }

    #[test]
    fn second_moment_of_amplitudes() {
        let d = 6;
        let basis = SubspaceBasis::full(Factor::Composite, d).unwrap();
        let est = monte_carlo_average(
            |psi: &PureState| psi.amplitudes()[3].norm_sqr(),
            |rng| sample_uniform_state(&basis, rng),
            20_000,
            StreamPlan::new(8, 2),
        )
        .unwrap();
        assert!((est.mean - 1.0 / d as f64).abs() < 3.0 * est.standard_error);
    }

    #[test]
    fn product_state_with_fixed_system() {
        let layout = SpaceLayout::new(2, 5).unwrap();
        let psi = PureState::from_slice(Factor::System, &[C64::new(0.8, 0.0), C64::new(0.0, 0.6)]).unwrap();
        let sys = SubspaceBasis::of_state(&psi);
        let bath = SubspaceBasis::full(Factor::Bath, 5).unwrap();
        let est = monte_carlo_average(
            |s: &PureState| partial_trace_bath(s, &layout).unwrap().into_matrix(),
            |rng| sample_product_state(&sys, &bath, &layout, rng).unwrap(),
            10_000,
            StreamPlan::new(2, 2),
        )
        .unwrap();
        // the system part is pure up to a phase, so every draw reduces to |psi><psi|
        assert!(est.contains(&psi.projector(), 3.0, 1e-12));

        // fully deterministic product when both spaces are one-dimensional
        let phi = PureState::basis(Factor::Bath, 5, 2).unwrap();
        let mut rng = stream_rng(1, 1);
        let out = sample_product_state(&sys, &SubspaceBasis::of_state(&phi), &layout, &mut rng).unwrap();
        let expect = tensor_product(&psi, &phi, &layout).unwrap();
        assert!((expect.inner(&out).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn system_and_bath_draws_are_uncorrelated() {
        let layout = SpaceLayout::new(2, 3).unwrap();
        let sys = SubspaceBasis::full(Factor::System, 2).unwrap();
        let bath = SubspaceBasis::full(Factor::Bath, 3).unwrap();
        // x = |psi_0|^2, y = |phi_0|^2; estimate E[xy], E[x], E[y]
        let est = monte_carlo_average(
            |s: &PureState| {
                let a = s.amplitudes();
                let x = a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr();
                let y = a[0].norm_sqr() + a[3].norm_sqr();
                vec![x * y, x, y]
            },
            |rng| sample_product_state(&sys, &bath, &layout, rng).unwrap(),
            20_000,
            StreamPlan::new(77, 4),
        )
        .unwrap();
        let cov = est.mean[0] - est.mean[1] * est.mean[2];
        // x*y dominates the spread of the covariance estimate
        assert!(cov.abs() < 3.0 * est.standard_error[0], "cov = {cov}");
    }

    #[test]
    fn unitary_rotation_inside_subspace_leaves_statistics_unchanged() {
        let tol = Tolerances::default();
        let mut rng = stream_rng(99, 0);
        let u = random_unitary(10, &mut rng);
        let cols = u.columns(0, 4).into_owned();
        let w = random_unitary(4, &mut rng);
        let basis = SubspaceBasis::new(Factor::Composite, cols.clone(), &tol).unwrap();
        let rotated = SubspaceBasis::new(Factor::Composite, &cols * w, &tol).unwrap();
        let probe = 0;
        let draw = |b: &SubspaceBasis, seed| {
            let mut rng = stream_rng(seed, 0);
            (0..10_000)
                .map(|_| sample_uniform_state(b, &mut rng).amplitudes()[probe].norm_sqr())
                .collect::<Vec<_>>()
        };
        let ks = ks_two_sample(&draw(&basis, 1), &draw(&rotated, 2));
        assert!(ks < 0.02, "KS = {ks}");
    }

    #[test]
    fn results_are_reproducible_and_order_independent() {
        let basis = SubspaceBasis::full(Factor::Composite, 8).unwrap();
        let run = || {
            monte_carlo_average(
                |psi: &PureState| psi.amplitudes()[0].re,
                |rng| sample_uniform_state(&basis, rng),
                1000,
                StreamPlan::new(123, 5),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.standard_error.to_bits(), b.standard_error.to_bits());

        let parts: Vec<Moments> = (0..5)
            .map(|k| {
                let mut rng = stream_rng(1, k);
                let mut m = Moments::default();
                for _ in 0..200 {
                    m.push(&[sample_uniform_state(&basis, &mut rng).amplitudes()[0].re * 1e3 + 1e6]);
                }
                m
            })
            .collect();
        let mut fwd = Moments::default();
        parts.iter().for_each(|p| fwd.merge(p));
        let mut rev = Moments::default();
        parts.iter().rev().for_each(|p| rev.merge(p));
        let (mf, sf) = fwd.finish();
        let (mr, sr) = rev.finish();
        assert!((mf[0] - mr[0]).abs() <= 1e-13 * mf[0].abs());
        assert!((sf[0] - sr[0]).abs() <= 1e-13 * sf[0].abs().max(1.0));
    }

    #[test]
    fn block_sampler_matches_single_draws() {
        let tol = Tolerances::default();
        let mut rng = stream_rng(4, 4);
        let u = random_unitary(6, &mut rng);
        let basis = SubspaceBasis::new(Factor::Composite, u.columns(0, 3).into_owned(), &tol).unwrap();
        let mut r1 = stream_rng(10, 0);
        let mut r2 = stream_rng(10, 0);
        let block = sample_uniform_block(&basis, 5, &mut r1);
        for j in 0..5 {
            let single = sample_uniform_state(&basis, &mut r2);
            let diff = (block.column(j) - single.amplitudes()).norm();
            assert!(diff < 1e-14);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = stream_rng(0, 0);
        let u = random_unitary(7, &mut rng);
        let dev = linalg::max_abs(&(u.adjoint() * &u - CMatrix::identity(7, 7)));
        assert!(dev < 1e-12);
    }
}
