//! Equilibration and initial-state-independence bounds: right-hand sides,
//! empirical or exact left-hand sides, and self-describing reports.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::equilibrium::{
    delta, overlaps_block, subspace_average, BathAverageMap, DegeneracyPolicy, EigenstateReductions,
};
use crate::error::{Error, Result};
use crate::hilbert::{bloch_of_matrix, reduce_pair_to_system, trace_norm, BlochVector, SpaceLayout};
use crate::linalg::{self, CMatrix, SplitMatrix, C64};
use crate::sampling::{
    monte_carlo_batched, sample_uniform_block, stream_rng, MonteCarloEstimate, StreamPlan, SubspaceBasis,
};
use crate::spectral::SpectralData;
use crate::SCHEMA_VERSION;

/// Concentration constant `c = 1 / (18 pi^3)`.
pub const C: f64 = 1.0 / (18.0 * PI * PI * PI);

fn positive_dim(name: &str, v: f64) -> Result<()> {
    if !(v >= 1.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} = {v}, need a dimension >= 1")));
    }
    Ok(())
}

/// `(sqrt(d_S delta / d_R), sqrt(d_S / d_R))`
pub fn theorem0_rhs(d_s: f64, d_r: f64, delta: f64) -> Result<(f64, f64)> {
    positive_dim("d_S", d_s)?;
    positive_dim("d_R", d_r)?;
    if !(delta > 0.0 && delta <= 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0, 1]")));
    }
    Ok(((d_s * delta / d_r).sqrt(), (d_s / d_r).sqrt()))
}

/// `2 exp(-c d_R eps^2)`
pub fn theorem0_tail_bound(d_r: f64, epsilon: f64) -> f64 {
    2.0 * (-C * d_r * epsilon * epsilon).exp()
}

/// `eps + 2 sqrt(d_S/d_R) + 2/d_R^(1/3) + (8/p) exp(-c d_R^(1/3))`;
/// infinite for `p = 0`.
pub fn epsilon_prime(epsilon: f64, d_s: f64, d_r: f64, p: f64) -> Result<f64> {
    positive_dim("d_S", d_s)?;
    positive_dim("d_R", d_r)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon}")));
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    let cube = d_r.cbrt();
    Ok(epsilon + 2.0 * (d_s / d_r).sqrt() + 2.0 / cube + 8.0 / p * (-C * cube).exp())
}

/// `(sqrt(d_S/d_B) + eps, 2 exp(-c d_B eps^2))`
pub fn popescu_bound(d_s: f64, d_b: f64, epsilon: f64) -> (f64, f64) {
    ((d_s / d_b).sqrt() + epsilon, 2.0 * (-C * d_b * epsilon * epsilon).exp())
}

/// Empirical exceedance frequency of a distance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub frequency: f64,
    pub threshold: f64,
    pub bound: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl TailEstimate {
    /// The probability bound carries no information.
    pub fn vacuous(&self) -> bool {
        self.bound >= 1.0
    }
}

/// Monte Carlo over uniform states of `H_R` of `|| rho_bar - <rho_bar>_{H_R} ||`.
#[derive(Debug, Clone)]
pub struct Theorem0Experiment {
    pub delta: f64,
    pub d_r: usize,
    pub distance: MonteCarloEstimate<f64>,
    pub tail: TailEstimate,
    pub epsilon: f64,
}

/// Samples `n` states from `H_R` and records the distance of their
/// time-averaged reduction from the exact subspace average, plus how often
/// it exceeds `sqrt(d_S delta / d_R) + epsilon`.
pub fn theorem0_experiment(
    subspace: &SubspaceBasis,
    spec: &SpectralData,
    red: &EigenstateReductions,
    epsilon: f64,
    n_samples: usize,
    plan: StreamPlan,
    policy: DegeneracyPolicy,
) -> Result<Theorem0Experiment> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon}")));
    }
    let reference = subspace_average(red, subspace, spec, policy)?;
    let dl = delta(red, subspace, spec)?;
    let d_s = red.layout().d_system() as f64;
    let d_r = subspace.dim();
    let (strong, _) = theorem0_rhs(d_s, d_r as f64, dl.min(1.0))?;
    let threshold = strong + epsilon;
    let est = monte_carlo_batched(n_samples, plan, |rng, m| {
        let x = SplitMatrix::from_complex(&sample_uniform_block(subspace, m, rng));
        time_averaged_block(spec, red, &x)
            .into_iter()
            .map(|rho| {
                let dist = trace_norm(&(rho - &reference));
                vec![dist, if dist > threshold { 1.0 } else { 0.0 }]
            })
            .collect()
    })?;
    Ok(Theorem0Experiment {
        delta: dl,
        d_r,
        distance: MonteCarloEstimate {
            mean: est.mean[0],
            standard_error: est.standard_error[0],
            n_samples: est.n_samples,
            seed: est.seed,
            n_streams: est.n_streams,
        },
        tail: TailEstimate {
            frequency: est.mean[1],
            threshold,
            bound: theorem0_tail_bound(d_r as f64, epsilon),
            n_samples: est.n_samples,
            seed: est.seed,
        },
        epsilon,
    })
}

/// `rho_bar` for each column of a block of composite states.
pub(crate) fn time_averaged_block(spec: &SpectralData, red: &EigenstateReductions, states: &SplitMatrix) -> Vec<CMatrix> {
    let c = overlaps_block(spec, states);
    let w: DMatrix<f64> = c.re.component_mul(&c.re) + c.im.component_mul(&c.im);
    let mut out = red.weighted_sums(&w);
    for block in red.degenerate_blocks() {
        for (k, rho) in out.iter_mut().enumerate() {
            for (n, m, r) in &block.pairs {
                let cn = C64::new(c.re[(*n, k)], c.im[(*n, k)]);
                let cm = C64::new(c.re[(*m, k)], c.im[(*m, k)]);
                *rho += r * (cn * cm.conj());
            }
        }
    }
    out.iter_mut().for_each(linalg::hermitize);
    out
}

/// `< || rho_bar - <rho_bar>_{H_R} || >_{H_R}` by Monte Carlo.
pub fn theorem0_empirical_lhs(
    subspace: &SubspaceBasis,
    spec: &SpectralData,
    red: &EigenstateReductions,
    n_samples: usize,
    plan: StreamPlan,
    policy: DegeneracyPolicy,
) -> Result<MonteCarloEstimate<f64>> {
    Ok(theorem0_experiment(subspace, spec, red, 1.0, n_samples, plan, policy)?.distance)
}

/// Empirical `Pr{ distance > sqrt(d_S delta/d_R) + eps }` and its bound.
pub fn theorem0_tail_frequency(
    subspace: &SubspaceBasis,
    spec: &SpectralData,
    red: &EigenstateReductions,
    epsilon: f64,
    n_samples: usize,
    plan: StreamPlan,
    policy: DegeneracyPolicy,
) -> Result<TailEstimate> {
    Ok(theorem0_experiment(subspace, spec, red, epsilon, n_samples, plan, policy)?.tail)
}

/// Frequency with which `|| tr_B |Psi><Psi| - 1/d_S ||` exceeds
/// `sqrt(d_S/d_B) + eps` for uniform `Psi` on the whole space.
pub fn popescu_tail_frequency(layout: &SpaceLayout, epsilon: f64, n_samples: usize, plan: StreamPlan) -> Result<TailEstimate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon}")));
    }
    let (ds, db) = (layout.d_system(), layout.d_bath());
    let (threshold, bound) = popescu_bound(ds as f64, db as f64, epsilon);
    let full = SubspaceBasis::full(crate::hilbert::Factor::Composite, layout.d())?;
    let mixed = CMatrix::identity(ds, ds) / C64::new(ds as f64, 0.0);
    let est = monte_carlo_batched(n_samples, plan, |rng, m| {
        let x = sample_uniform_block(&full, m, rng);
        (0..m)
            .map(|k| {
                let col = x.column(k);
                let rho = reduce_pair_to_system(col.as_slice(), col.as_slice(), layout);
                if trace_norm(&(rho - &mixed)) > threshold {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    })?;
    Ok(TailEstimate {
        frequency: est.mean,
        threshold,
        bound,
        n_samples: est.n_samples,
        seed: est.seed,
    })
}

/// Supremum over system states of `|| <rho_bar>_{B_R}[psi] - <rho_bar>_{S (x) B_R} ||`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryCondition {
    pub value: f64,
    /// True for the closed-form qubit case; otherwise `value` is a lower
    /// bound found by search.
    pub exact: bool,
    pub n_starts: usize,
    /// The maximizing system state.
    pub maximizer: Vec<(f64, f64)>,
}

/// Default number of random starts for `d_S > 2`.
pub const DEFAULT_STARTS: usize = 512;

/// For `d_S = 2` the supremum is the largest singular value of the 3x3 map
/// from `p0` to the Bloch vector of the deviation. Otherwise `n_starts`
/// uniform states seed a coordinate ascent to step `1e-8`.
pub fn necessary_condition_lhs(map: &BathAverageMap, n_starts: usize, seed: u64) -> NecessaryCondition {
    if let Some(t) = map.bloch_matrix() {
        let svd = t.svd(true, true);
        let (k, value) = svd
            .singular_values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, s)| if s > best.1 { (k, s) } else { best });
        let v_t = svd.v_t.expect("requested");
        let p0 = [v_t[(k, 0)], v_t[(k, 1)], v_t[(k, 2)]];
        let psi = qubit_state(p0);
        return NecessaryCondition {
            value,
            exact: true,
            n_starts: 0,
            maximizer: psi.iter().map(|z| (z.re, z.im)).collect(),
        };
    }
    let ds = map.d_system();
    let n_starts = n_starts.max(1);
    let mut rng = stream_rng(seed, 0);
    let sys = SubspaceBasis::full(crate::hilbert::Factor::System, ds).expect("d_S >= 2");
    let mut starts: Vec<(f64, Vec<C64>)> = (0..n_starts)
        .map(|_| {
            let x = sample_uniform_block(&sys, 1, &mut rng);
            let v: Vec<C64> = x.column(0).iter().copied().collect();
            (map.deviation(&v), v)
        })
        .collect();
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for (value, v) in starts.into_iter().take(8) {
        let refined = coordinate_ascent(map, v, value);
        if refined.0 > best.0 {
            best = refined;
        }
    }
    NecessaryCondition {
        value: best.0,
        exact: false,
        n_starts,
        maximizer: best.1.iter().map(|z| (z.re, z.im)).collect(),
    }
}

fn qubit_state(p: [f64; 3]) -> [C64; 2] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let (x, y, z) = if n > 0.0 { (p[0] / n, p[1] / n, p[2] / n) } else { (0.0, 0.0, 1.0) };
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = y.atan2(x);
    [C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]
}

fn coordinate_ascent(map: &BathAverageMap, mut v: Vec<C64>, mut value: f64) -> (f64, Vec<C64>) {
    let normalize = |v: &mut Vec<C64>| {
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= n);
    };
    let mut step = 0.1;
    while step > 1e-8 {
        let mut improved = false;
        for k in 0..v.len() {
            for dir in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)] {
                let mut trial = v.clone();
                trial[k] += dir * step;
                normalize(&mut trial);
                let f = map.deviation(&trial);
                if f > value {
                    value = f;
                    v = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (value, v)
}

fn as_vectors(p: &[BlochVector]) -> Vec<Vector3<f64>> {
    p.iter().map(|b| Vector3::from(b.to_array())).collect()
}

/// `G = sum_n p_n p_n^T`
pub fn gram(p: &[Vector3<f64>]) -> Matrix3<f64> {
    p.iter().fold(Matrix3::zeros(), |g, v| g + v * v.transpose())
}

/// `(sqrt(tr G^2) / d, (1/d) sum_n |p_n|^2)`
pub fn theorem2_lhs_from_vectors(p: &[Vector3<f64>]) -> (f64, f64) {
    let d = p.len() as f64;
    let g = gram(p);
    let lhs_i = (g * g).trace().max(0.0).sqrt() / d;
    let lhs_ii = p.iter().map(|v| v.norm_squared()).sum::<f64>() / d;
    (lhs_i, lhs_ii)
}

/// `lambda_max(A)` with `A = (1/d) sum_n p_n p_n^T`: the exact qubit
/// necessary-condition supremum over the full bath.
pub fn lambda_max_average_outer(p: &[Vector3<f64>]) -> f64 {
    let a = gram(p) / p.len() as f64;
    a.symmetric_eigenvalues().max()
}

/// `(sum_nm (p_n . p_m)^2, (1/3) (sum_n |p_n|^2)^2)`; the first is never
/// below the second.
pub fn appendix_inequality(p: &[Vector3<f64>]) -> (f64, f64) {
    let g = gram(p);
    let s: f64 = p.iter().map(|v| v.norm_squared()).sum();
    ((g * g).trace(), s * s / 3.0)
}

/// `(lhs_i, lhs_ii)` of the qubit bounds.
pub fn theorem2_lhs(red: &EigenstateReductions) -> Result<(f64, f64)> {
    let p = red
        .bloch()
        .ok_or_else(|| Error::InvalidArgument(format!("needs d_S = 2, got {}", red.layout().d_system())))?;
    Ok(theorem2_lhs_from_vectors(&as_vectors(p)))
}

/// A float that serializes non-finite values as the strings `"inf"`,
/// `"-inf"` and `"nan"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Real(x)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    T0i,
    T0ii,
    T1,
    T1prime,
    T2i,
    T2ii,
    Popescu,
    #[serde(rename = "SufficientISI")]
    SufficientIsi,
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TheoremId::T0i => "T0i",
            TheoremId::T0ii => "T0ii",
            TheoremId::T1 => "T1",
            TheoremId::T1prime => "T1prime",
            TheoremId::T2i => "T2i",
            TheoremId::T2ii => "T2ii",
            TheoremId::Popescu => "Popescu",
            TheoremId::SufficientIsi => "SufficientISI",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Vacuous,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Vacuous => "vacuous",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Where the right-hand side of an `eps'`-based bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    /// Computed from the bound's own formula and parameters.
    Formula,
    /// A requested accuracy `eps'` supplied by the caller.
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub schema_version: u32,
    pub theorem: TheoremId,
    pub rhs_kind: RhsKind,
    pub lhs: Real,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lhs_standard_error: Option<Real>,
    pub rhs: Real,
    /// Largest value the left-hand side can take.
    pub lhs_range: Real,
    pub vacuous: bool,
    pub verdict: Verdict,
    pub parameters: BTreeMap<String, Real>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

fn param(map: &BTreeMap<String, Real>, key: &str) -> Result<f64> {
    map.get(key)
        .map(|r| r.0)
        .ok_or_else(|| Error::InvalidArgument(format!("report lacks parameter {key:?}")))
}

impl TheoremReport {
    fn build(
        theorem: TheoremId,
        rhs_kind: RhsKind,
        lhs: f64,
        lhs_range: f64,
        parameters: BTreeMap<String, Real>,
        strict: bool,
    ) -> Result<Self> {
        let mut r = TheoremReport {
            schema_version: SCHEMA_VERSION,
            theorem,
            rhs_kind,
            lhs: Real(lhs),
            lhs_standard_error: None,
            rhs: Real(f64::NAN),
            lhs_range: Real(lhs_range),
            vacuous: false,
            verdict: Verdict::Indeterminate,
            parameters,
            seed: None,
            n_samples: None,
            notes: Vec::new(),
        };
        let rhs = r.recompute_rhs()?;
        r.rhs = Real(rhs);
        r.vacuous = rhs >= lhs_range;
        r.verdict = if r.vacuous {
            Verdict::Vacuous
        } else if (strict && lhs < rhs) || (!strict && lhs <= rhs) {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        };
        Ok(r)
    }

    /// The right-hand side recomputed from `parameters`.
    pub fn recompute_rhs(&self) -> Result<f64> {
        let p = &self.parameters;
        let eps_prime = || -> Result<f64> {
            match self.rhs_kind {
                RhsKind::Target => param(p, "eps_prime_target"),
                RhsKind::Formula => epsilon_prime(param(p, "epsilon")?, param(p, "d_s")?, param(p, "d_r")?, param(p, "p")?),
            }
        };
        Ok(match self.theorem {
            TheoremId::T0i => theorem0_rhs(param(p, "d_s")?, param(p, "d_r")?, param(p, "delta")?)?.0,
            TheoremId::T0ii => theorem0_tail_bound(param(p, "d_r")?, param(p, "epsilon")?),
            TheoremId::Popescu => popescu_bound(param(p, "d_s")?, param(p, "d_b")?, param(p, "epsilon")?).1,
            TheoremId::T1 | TheoremId::T1prime => eps_prime()?,
            TheoremId::T2i => 3f64.sqrt() * eps_prime()?,
            TheoremId::T2ii => 3.0 * eps_prime()?,
            TheoremId::SufficientIsi => param(p, "threshold")?,
        })
    }

    /// Stored `rhs` agrees with the recomputed one to `1e-12` (relative for
    /// large values; infinities must match exactly).
    pub fn is_consistent(&self) -> bool {
        match self.recompute_rhs() {
            Ok(r) if r.is_infinite() || self.rhs.0.is_infinite() => r == self.rhs.0,
            Ok(r) => (r - self.rhs.0).abs() <= 1e-12 * r.abs().max(1.0),
            Err(_) => false,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

fn params(entries: &[(&str, f64)]) -> BTreeMap<String, Real> {
    entries.iter().map(|(k, v)| (k.to_string(), Real(*v))).collect()
}

/// Parameters that determine `eps'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsPrime {
    Formula { epsilon: f64, d_s: f64, d_r: f64, p: f64 },
    Target(f64),
}

impl EpsPrime {
    fn entries(&self) -> (RhsKind, Vec<(&'static str, f64)>) {
        match *self {
            EpsPrime::Formula { epsilon, d_s, d_r, p } => {
                let value = epsilon_prime(epsilon, d_s, d_r, p).unwrap_or(f64::NAN);
                (
                    RhsKind::Formula,
                    vec![("epsilon", epsilon), ("d_s", d_s), ("d_r", d_r), ("p", p), ("c", C), ("eps_prime", value)],
                )
            }
            EpsPrime::Target(x) => (RhsKind::Target, vec![("eps_prime_target", x)]),
        }
    }
}

pub fn report_theorem0_i(exp: &Theorem0Experiment, d_s: usize) -> Result<TheoremReport> {
    let mut r = TheoremReport::build(
        TheoremId::T0i,
        RhsKind::Formula,
        exp.distance.mean,
        2.0,
        params(&[("d_s", d_s as f64), ("d_r", exp.d_r as f64), ("delta", exp.delta.min(1.0))]),
        false,
    )?;
    r.lhs_standard_error = Some(Real(exp.distance.standard_error));
    r.seed = Some(exp.distance.seed);
    r.n_samples = Some(exp.distance.n_samples);
    Ok(r)
}

pub fn report_theorem0_ii(exp: &Theorem0Experiment) -> Result<TheoremReport> {
    let mut r = TheoremReport::build(
        TheoremId::T0ii,
        RhsKind::Formula,
        exp.tail.frequency,
        1.0,
        params(&[
            ("d_r", exp.d_r as f64),
            ("epsilon", exp.epsilon),
            ("c", C),
            ("delta", exp.delta),
            ("threshold", exp.tail.threshold),
        ]),
        false,
    )?;
    r.seed = Some(exp.tail.seed);
    r.n_samples = Some(exp.tail.n_samples);
    Ok(r)
}

pub fn report_popescu(d_s: usize, d_b: usize, epsilon: f64, tail: &TailEstimate) -> Result<TheoremReport> {
    let mut r = TheoremReport::build(
        TheoremId::Popescu,
        RhsKind::Formula,
        tail.frequency,
        1.0,
        params(&[
            ("d_s", d_s as f64),
            ("d_b", d_b as f64),
            ("epsilon", epsilon),
            ("c", C),
            ("threshold", tail.threshold),
        ]),
        false,
    )?;
    r.seed = Some(tail.seed);
    r.n_samples = Some(tail.n_samples);
    Ok(r)
}

/// Theorem 1 (`id = T1`, bath subspace) or its full-bath form (`T1prime`).
pub fn report_necessary_condition(id: TheoremId, lhs: &NecessaryCondition, eps: EpsPrime) -> Result<TheoremReport> {
    if !matches!(id, TheoremId::T1 | TheoremId::T1prime) {
        return Err(Error::InvalidArgument(format!("{id} is not a necessary-condition bound")));
    }
    let (kind, entries) = eps.entries();
    let r = TheoremReport::build(id, kind, lhs.value, 2.0, params(&entries), true)?;
    Ok(if lhs.exact {
        r
    } else {
        r.with_note(format!("supremum searched from {} starts; lhs is a lower bound", lhs.n_starts))
    })
}

/// The qubit bounds `T2i` (`lhs_i < sqrt(3) eps'`) and `T2ii`
/// (`lhs_ii < 3 eps'`).
pub fn report_theorem2(id: TheoremId, lhs: f64, eps: EpsPrime) -> Result<TheoremReport> {
    if !matches!(id, TheoremId::T2i | TheoremId::T2ii) {
        return Err(Error::InvalidArgument(format!("{id} is not a qubit bound")));
    }
    let (kind, entries) = eps.entries();
    TheoremReport::build(id, kind, lhs, 1.0, params(&entries), true)
}

/// Default smallness threshold for `sqrt(delta)`.
pub const SUFFICIENT_THRESHOLD: f64 = 0.1;

/// `sqrt(delta)` against a smallness threshold: satisfied below it,
/// violated above it, indeterminate within `1e-9` relative of it.
pub fn sufficient_condition_report(delta: f64, threshold: f64) -> Result<TheoremReport> {
    if !(delta > 0.0 && delta <= 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0, 1]")));
    }
    let root = delta.sqrt();
    let mut r = TheoremReport::build(
        TheoremId::SufficientIsi,
        RhsKind::Formula,
        root,
        f64::INFINITY,
        params(&[("delta", delta), ("threshold", threshold)]),
        true,
    )?;
    if (root - threshold).abs() <= 1e-9 * threshold.max(1.0) {
        r.verdict = Verdict::Indeterminate;
    }
    Ok(r)
}

/// Smallest accuracy compatible with `lhs_ii < 3 eps'`.
pub fn isi_accuracy_floor(lhs_ii: f64) -> f64 {
    lhs_ii / 3.0
}

/// `theorem,rhs_kind,lhs,rhs,vacuous,verdict` rows, schema line first.
pub fn reports_csv(reports: &[TheoremReport]) -> String {
    let mut out = format!("# schema_version={SCHEMA_VERSION}\ntheorem,rhs_kind,lhs,rhs,vacuous,verdict\n");
    for r in reports {
        let kind = match r.rhs_kind {
            RhsKind::Formula => "formula",
            RhsKind::Target => "target",
        };
        let rhs = if r.rhs.0.is_finite() { r.rhs.0.to_string() } else { "inf".to_string() };
        out.push_str(&format!("{},{kind},{},{rhs},{},{}\n", r.theorem, r.lhs.0, r.vacuous, r.verdict));
    }
    out
}

/// Bloch vector of the deviation `<rho_bar>_{B_R}[p0] - <rho_bar>_{S (x) B_R}`.
pub fn deviation_bloch(map: &BathAverageMap, p0: [f64; 3]) -> Option<BlochVector> {
    (map.d_system() == 2).then(|| {
        let psi = qubit_state(p0);
        let x = nalgebra::DVector::from_column_slice(&psi);
        let p = &x * x.adjoint() - CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        bloch_of_matrix(&map.apply(&p))
    })
}
