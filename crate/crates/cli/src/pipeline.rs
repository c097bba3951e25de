//! Experiment stages. Each stage adds data files and summary lines to an
//! [`Artifacts`] record; nothing here touches the filesystem except reading
//! a model matrix file.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use isi_core::dynamics::{equilibration_metric, evolve_reduced};
use isi_core::equilibrium::{
    delta, eigenstate_reductions, eth_fit, overlaps, reductions_csv, time_averaged_state, BathAverageMap,
    DegeneracyPolicy, EigenstateReductions, OverlapCoefficients,
};
use isi_core::hilbert::{bloch_vector, tensor_product, Factor, PureState, SpaceLayout};
use isi_core::linalg::{pauli, CMatrix};
use isi_core::matrix_file;
use isi_core::models::{
    analytic_eigensystem, build_commuting_model, build_random_model, random_commuting_spec, random_cucchietti_bath,
    CommutingModelSpec,
};
use isi_core::sampling::{derive_seed, sample_uniform_state, stream_rng, StreamPlan, SubspaceBasis};
use isi_core::spectral::{check_nondegenerate_gaps, check_nondegenerate_spectrum, eigendecompose, GapCheck, SpectralData};
use isi_core::theorems::{
    isi_accuracy_floor, necessary_condition_lhs, popescu_tail_frequency, report_necessary_condition, report_popescu,
    report_theorem0_i, report_theorem0_ii, report_theorem2, reports_csv, sufficient_condition_report, theorem0_experiment,
    theorem2_lhs, EpsPrime, TheoremId, TheoremReport,
};
use isi_core::{Error, SCHEMA_VERSION};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{EpsPrimeMode, ExperimentConfig, ModelKind, Solver, Stage};
use crate::error::CliError;

const STREAM_MODEL: u64 = 1;
const STREAM_INITIAL: u64 = 2;
const STREAM_MONTE_CARLO: u64 = 3;
const STREAM_POPESCU: u64 = 4;
const STREAM_DYNAMICS: u64 = 5;
const STREAM_NECESSARY: u64 = 6;
const STREAM_SWEEP: u64 = 7;

/// Data files keyed by relative path, plus summary lines.
#[derive(Debug, Default, Clone)]
pub struct Artifacts {
    pub files: BTreeMap<String, String>,
    pub summary: Vec<String>,
}

impl Artifacts {
    fn json(&mut self, name: &str, value: &Value) {
        let text = serde_json::to_string_pretty(value).expect("json values serialize");
        self.files.insert(name.to_string(), text + "\n");
    }

    fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for l in &self.summary {
            s.push_str(l);
            s.push('\n');
        }
        s
    }
}

pub struct Model {
    pub kind: ModelKind,
    pub layout: SpaceLayout,
    pub spec: SpectralData,
    /// Total Hamiltonian, when it was assembled.
    pub total: Option<CMatrix>,
    pub system_hamiltonian: Option<CMatrix>,
    pub commuting: Option<CommutingModelSpec>,
}

fn system_qubit_hamiltonian(omega: f64) -> CMatrix {
    pauli()[2].map(|z| z * (0.5 * omega))
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<Model, CliError> {
    let m = &cfg.model;
    let tol = &cfg.tolerances;
    let mut rng = stream_rng(derive_seed(cfg.run.seed, STREAM_MODEL), 0);
    match m.kind {
        ModelKind::Commuting | ModelKind::Cucchietti => {
            let spec = if m.kind == ModelKind::Commuting {
                let d_bath = m.d_bath.expect("validated");
                if 2 * d_bath > tol.decomposition_cap {
                    return Err(Error::CapExceeded {
                        what: "commuting model",
                        dim: 2 * d_bath,
                        cap: tol.decomposition_cap,
                    }
                    .into());
                }
                random_commuting_spec(m.omega, d_bath, m.coupling_scale, m.energy_scale, &mut rng)?
            } else {
                random_cucchietti_bath(m.n_spins.expect("validated"), m.omega, m.coupling_scale, m.energy_scale, tol, &mut rng)?
            };
            let layout = spec.layout();
            let total = if m.export_matrix || m.solver == Solver::Dense {
                Some(build_commuting_model(&spec, &layout, tol)?.total().clone())
            } else {
                None
            };
            let spectral = match (&total, m.solver) {
                (Some(h), Solver::Dense) => eigendecompose(h, tol)?,
                _ => analytic_eigensystem(&spec, tol)?,
            };
            Ok(Model {
                kind: m.kind,
                layout,
                spec: spectral,
                total,
                system_hamiltonian: Some(system_qubit_hamiltonian(m.omega)),
                commuting: Some(spec),
            })
        }
        ModelKind::Random => {
            let layout = SpaceLayout::new(m.d_system.unwrap_or(2), m.d_bath.expect("validated"))?;
            let h = build_random_model(&layout, m.interaction_strength, tol, &mut rng)?;
            let spec = eigendecompose(h.total(), tol)?;
            Ok(Model {
                kind: m.kind,
                layout,
                spec,
                total: Some(h.total().clone()),
                system_hamiltonian: Some(h.system().clone()),
                commuting: None,
            })
        }
        ModelKind::File => {
            let path = cfg.resolve(m.path.as_ref().expect("validated"));
            let file = matrix_file::read(&path).map_err(|e| match e {
                Error::Io(io) => CliError::Io {
                    path: path.display().to_string(),
                    source: io,
                },
                other => other.into(),
            })?;
            let d = file.matrix.nrows();
            let layout = match (file.layout, m.d_system, m.d_bath) {
                (Some(l), None, None) => l,
                (Some(l), ds, db) => {
                    if ds.is_some_and(|x| x != l.d_system()) || db.is_some_and(|x| x != l.d_bath()) {
                        return Err(CliError::Config(format!(
                            "model.d_system/d_bath disagree with the layout {}x{} in {}",
                            l.d_system(),
                            l.d_bath(),
                            path.display()
                        )));
                    }
                    l
                }
                (None, Some(ds), db) => SpaceLayout::new(ds, db.unwrap_or(d / ds.max(1)))?,
                (None, None, Some(db)) => SpaceLayout::new(d / db.max(1), db)?,
                (None, None, None) => SpaceLayout::new(d, 1)?,
            };
            if layout.d() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{d}x{d} matrix for layout {}x{}",
                    layout.d_system(),
                    layout.d_bath()
                ))
                .into());
            }
            let spec = eigendecompose(&file.matrix, tol)?;
            Ok(Model {
                kind: m.kind,
                layout,
                spec,
                total: Some(file.matrix),
                system_hamiltonian: None,
                commuting: None,
            })
        }
    }
}

fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn model_info(cfg: &ExperimentConfig, model: &Model, out: &mut Artifacts) -> Result<(), CliError> {
    let m = &cfg.model;
    let mut info = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": m.kind,
        "seed": cfg.run.seed,
        "d_system": model.layout.d_system(),
        "d_bath": model.layout.d_bath(),
        "d": model.layout.d(),
        "norm": model.spec.norm(),
        "solver": m.solver,
    });
    let obj = info.as_object_mut().expect("object literal");
    match m.kind {
        ModelKind::Commuting | ModelKind::Cucchietti => {
            let spec = model.commuting.as_ref().expect("commuting models keep their spec");
            obj.insert("omega".into(), json!(spec.omega));
            obj.insert("coupling_scale".into(), json!(m.coupling_scale));
            obj.insert("energy_scale".into(), json!(m.energy_scale));
            if let Some(n) = m.n_spins {
                obj.insert("n_spins".into(), json!(n));
            }
            obj.insert("v".into(), json!(spec.v));
            obj.insert("bath_energies".into(), json!(spec.bath_energies));
        }
        ModelKind::Random => {
            obj.insert("interaction_strength".into(), json!(m.interaction_strength));
        }
        ModelKind::File => {
            obj.insert("path".into(), json!(m.path));
        }
    }
    out.json("model.json", &info);
    if m.export_matrix {
        if let Some(h) = &model.total {
            out.files.insert("hamiltonian.hmat".into(), matrix_file::to_string(h, Some(&model.layout)));
        }
    }
    out.line(format!(
        "model: {:?}, d_S = {}, d_B = {}, |H| = {:.6}",
        m.kind,
        model.layout.d_system(),
        model.layout.d_bath(),
        model.spec.norm()
    ));
    Ok(())
}

fn gap_check(cfg: &ExperimentConfig, model: &Model) -> Option<GapCheck> {
    check_nondegenerate_gaps(&model.spec, cfg.tolerances.gaps, cfg.tolerances.gap_check_cap).ok()
}

fn spectrum(cfg: &ExperimentConfig, model: &Model, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = &model.spec;
    let mut csv = format!("# schema_version={SCHEMA_VERSION}\nn,energy\n");
    for (n, e) in spec.eigenvalues().iter().enumerate() {
        let _ = writeln!(csv, "{n},{e}");
    }
    out.files.insert("spectrum.csv".into(), csv);
    let levels = check_nondegenerate_spectrum(spec, cfg.tolerances.spectrum);
    let gaps = gap_check(cfg, model);
    let residual = model.total.as_ref().map(|h| spec.max_residual(h));
    out.json(
        "spectrum.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "dim": spec.dim(),
            "norm": spec.norm(),
            "levels": levels,
            "gaps": gaps,
            "gap_check_skipped": gaps.is_none(),
            "max_residual": residual,
            "unitarity_deviation": spec.unitarity_deviation(),
        }),
    );
    out.line(format!(
        "spectrum: nondegenerate levels: {} (min spacing {:.3e})",
        levels.nondegenerate, levels.min_level_spacing
    ));
    match gaps {
        Some(g) => out.line(format!(
            "spectrum: nondegenerate gaps: {} (closest gap coincidence {:.3e})",
            g.nondegenerate, g.min_gap_collision
        )),
        None => out.line(format!(
            "spectrum: gap check skipped (d = {} above tolerances.gap_check_cap)",
            spec.dim()
        )),
    }
    Ok(())
}

/// Initial state `psi (x) Phi` with `Phi` uniform in `B_R`, and the
/// reductions every later stage needs.
pub struct Setup {
    pub red: EigenstateReductions,
    pub psi: PureState,
    pub bath_basis: SubspaceBasis,
    pub subspace: SubspaceBasis,
    pub c: OverlapCoefficients,
    pub d_r: usize,
    pub policy: DegeneracyPolicy,
}

pub fn setup(cfg: &ExperimentConfig, model: &Model) -> Result<Setup, CliError> {
    let layout = &model.layout;
    let d_r = cfg.analysis.d_r.unwrap_or(layout.d_bath());
    if d_r > layout.d_bath() {
        return Err(CliError::Config(format!(
            "analysis.d_r = {d_r} exceeds d_B = {}",
            layout.d_bath()
        )));
    }
    let red = eigenstate_reductions(&model.spec, layout, &cfg.tolerances)?;
    let policy = cfg.analysis.degeneracy;
    red.check_policy(policy)?;
    let mut rng = stream_rng(derive_seed(cfg.run.seed, STREAM_INITIAL), 0);
    let psi = sample_uniform_state(&SubspaceBasis::full(Factor::System, layout.d_system())?, &mut rng);
    let bath_basis = SubspaceBasis::leading(Factor::Bath, layout.d_bath(), d_r)?;
    let phi = sample_uniform_state(&bath_basis, &mut rng);
    let subspace = SubspaceBasis::product(&psi, &bath_basis, layout)?;
    let c = overlaps(&model.spec, &tensor_product(&psi, &phi, layout)?)?;
    Ok(Setup {
        red,
        psi,
        bath_basis,
        subspace,
        c,
        d_r,
        policy,
    })
}

fn qubit_json(rho: &isi_core::hilbert::DensityMatrix) -> Value {
    match bloch_vector(rho) {
        Ok(p) => json!([p.x, p.y, p.z]),
        Err(_) => Value::Null,
    }
}

fn equilibrium(cfg: &ExperimentConfig, model: &Model, s: &Setup, out: &mut Artifacts) -> Result<(), CliError> {
    let layout = &model.layout;
    out.files.insert("reductions.csv".into(), reductions_csv(&s.red));
    if let (true, Some(hs)) = (cfg.analysis.eth, &model.system_hamiltonian) {
        let mut csv = format!("# schema_version={SCHEMA_VERSION}\nn,beta,residual,status\n");
        for (n, rho) in s.red.rho().iter().enumerate() {
            match eth_fit(rho, hs, None) {
                Ok(f) => {
                    let _ = writeln!(csv, "{n},{},{},ok", f.beta, f.residual);
                }
                Err(Error::NonConvergentFit { best, .. }) => {
                    let _ = writeln!(csv, "{n},{best},,bracket_edge");
                }
                Err(e) => return Err(e.into()),
            }
        }
        out.files.insert("eth.csv".into(), csv);
    }
    let dl = delta(&s.red, &s.subspace, &model.spec)?;
    let rho_bar = time_averaged_state(&s.c, &s.red, s.policy)?;
    let mean_purity = s.red.purity().iter().sum::<f64>() / s.red.len() as f64;
    let qubit = if layout.d_system() == 2 {
        let (i, ii) = theorem2_lhs(&s.red)?;
        json!({ "lhs_i": i, "lhs_ii": ii })
    } else {
        Value::Null
    };
    out.json(
        "equilibrium.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "d_r": s.d_r,
            "delta": dl,
            "sqrt_delta": dl.sqrt(),
            "mean_eigenstate_purity": mean_purity,
            "nondegenerate_levels": s.red.is_nondegenerate(),
            "degeneracy_policy": s.policy,
            "qubit_bounds": qubit,
            "initial_system_state": s.psi.amplitudes().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "rho_bar": matrix_json(rho_bar.matrix()),
            "rho_bar_purity": rho_bar.purity(),
            "rho_bar_bloch": if layout.d_system() == 2 { qubit_json(&rho_bar) } else { Value::Null },
        }),
    );
    out.line(format!(
        "equilibrium: delta over psi (x) B_R (d_R = {}) = {:.6}, sqrt(delta) = {:.6}",
        s.d_r,
        dl,
        dl.sqrt()
    ));
    out.line(format!("equilibrium: mean eigenstate purity = {mean_purity:.6}"));
    if !s.red.is_nondegenerate() {
        out.line("equilibrium: hypothesis violated: degenerate spectrum (degenerate blocks kept)");
    }
    Ok(())
}

fn eps_prime(cfg: &ExperimentConfig, model: &Model, d_r: usize) -> EpsPrime {
    let a = &cfg.analysis;
    match a.eps_prime {
        EpsPrimeMode::Target => EpsPrime::Target(a.eps_prime_target),
        EpsPrimeMode::Formula => EpsPrime::Formula {
            epsilon: a.epsilon,
            d_s: model.layout.d_system() as f64,
            d_r: d_r as f64,
            p: a.p,
        },
    }
}

fn bounds(cfg: &ExperimentConfig, model: &Model, s: &Setup, out: &mut Artifacts) -> Result<(), CliError> {
    let a = &cfg.analysis;
    let layout = &model.layout;
    let seed = cfg.run.seed;
    let gaps = gap_check(cfg, model);
    let mut reports: Vec<TheoremReport> = Vec::new();
    let wants = |id: TheoremId| a.theorems.contains(&id);

    if wants(TheoremId::T0i) || wants(TheoremId::T0ii) {
        let plan = StreamPlan::new(derive_seed(seed, STREAM_MONTE_CARLO), a.mc_streams);
        let exp = theorem0_experiment(&s.subspace, &model.spec, &s.red, a.epsilon, a.mc_samples, plan, s.policy)?;
        let mut found = Vec::new();
        if wants(TheoremId::T0i) {
            found.push(report_theorem0_i(&exp, layout.d_system())?);
        }
        if wants(TheoremId::T0ii) {
            found.push(report_theorem0_ii(&exp)?);
        }
        for r in found {
            reports.push(match &gaps {
                Some(g) if !g.nondegenerate => r.with_note("hypothesis violated: degenerate energy gaps"),
                None => r.with_note("gap hypothesis not checked (d above gap_check_cap)"),
                _ => r,
            });
        }
    }
    if wants(TheoremId::T1) {
        let map = BathAverageMap::restricted(&model.spec, &s.red, &s.bath_basis, s.policy)?;
        let lhs = necessary_condition_lhs(&map, a.necessary_starts, derive_seed(seed, STREAM_NECESSARY));
        reports.push(report_necessary_condition(TheoremId::T1, &lhs, eps_prime(cfg, model, s.d_r))?);
    }
    if wants(TheoremId::T1prime) {
        let map = BathAverageMap::full(&s.red, s.policy)?;
        let lhs = necessary_condition_lhs(&map, a.necessary_starts, derive_seed(seed, STREAM_NECESSARY));
        reports.push(report_necessary_condition(
            TheoremId::T1prime,
            &lhs,
            eps_prime(cfg, model, layout.d_bath()),
        )?);
    }
    let mut lhs_ii = None;
    if wants(TheoremId::T2i) || wants(TheoremId::T2ii) {
        if layout.d_system() == 2 {
            let (i, ii) = theorem2_lhs(&s.red)?;
            let eps = eps_prime(cfg, model, layout.d_bath());
            if wants(TheoremId::T2i) {
                reports.push(report_theorem2(TheoremId::T2i, i, eps)?);
            }
            if wants(TheoremId::T2ii) {
                reports.push(report_theorem2(TheoremId::T2ii, ii, eps)?);
                lhs_ii = Some(ii);
            }
        } else {
            out.line(format!("bounds: T2i/T2ii skipped (d_S = {}, need 2)", layout.d_system()));
        }
    }
    if wants(TheoremId::Popescu) {
        let plan = StreamPlan::new(derive_seed(seed, STREAM_POPESCU), a.mc_streams);
        let tail = popescu_tail_frequency(layout, a.epsilon, a.mc_samples, plan)?;
        reports.push(report_popescu(layout.d_system(), layout.d_bath(), a.epsilon, &tail)?);
    }
    let mut sqrt_delta = None;
    if wants(TheoremId::SufficientIsi) {
        let dl = delta(&s.red, &s.subspace, &model.spec)?;
        let r = sufficient_condition_report(dl.min(1.0), a.sufficient_threshold)?;
        sqrt_delta = Some((r.lhs.0, r.verdict));
        reports.push(r);
    }
    if !s.red.is_nondegenerate() {
        reports = reports
            .into_iter()
            .map(|r| r.with_note("hypothesis violated: degenerate spectrum"))
            .collect();
    }

    reports.sort_by_key(|r| r.theorem);
    for r in &reports {
        out.files.insert(format!("report_{}.json", r.theorem), r.to_json() + "\n");
        let se = r.lhs_standard_error.map(|s| format!(" +- {:.2e}", s.0)).unwrap_or_default();
        let rhs = if r.rhs.0.is_finite() { format!("{:.6}", r.rhs.0) } else { "inf".into() };
        out.line(format!(
            "bounds: {:<13} lhs = {:.6}{se}  rhs = {rhs} ({:?})  -> {}",
            r.theorem.to_string(),
            r.lhs.0,
            r.rhs_kind,
            r.verdict
        ));
    }
    out.files.insert("bounds.csv".into(), reports_csv(&reports));
    if let Some((root, verdict)) = sqrt_delta {
        out.line(format!("conclusion: sufficient condition {verdict} (sqrt(delta) = {root:.6})"));
    }
    if let Some(ii) = lhs_ii {
        out.line(format!("conclusion: T2ii lhs (1/d) sum |p_n|^2 = {ii:.6}"));
        let floor = isi_accuracy_floor(ii);
        if (ii - 1.0).abs() < 1e-6 {
            out.line("conclusion: system ISI cannot hold with accuracy better than ≈ 1/3");
        } else {
            out.line(format!(
                "conclusion: system ISI cannot hold with accuracy better than ≈ {floor:.6}"
            ));
        }
    }
    Ok(())
}

fn averaging_window(cfg: &ExperimentConfig, model: &Model) -> f64 {
    let floor = cfg.tolerances.spectrum * model.spec.scale();
    cfg.dynamics.t_factor / model.spec.min_level_spacing().max(floor)
}

fn dynamics(cfg: &ExperimentConfig, model: &Model, s: &Setup, out: &mut Artifacts) -> Result<(), CliError> {
    let dy = &cfg.dynamics;
    let layout = &model.layout;
    let n = dy.trajectory_points;
    let times: Vec<f64> = (0..n)
        .map(|k| if n == 1 { 0.0 } else { dy.trajectory_span * k as f64 / (n - 1) as f64 })
        .collect();
    let traj = evolve_reduced(&s.c, &model.spec, layout, &times)?;
    out.files.insert("trajectory.csv".into(), traj.to_csv());
    let t_max = averaging_window(cfg, model);
    let mut rng = stream_rng(derive_seed(cfg.run.seed, STREAM_DYNAMICS), 0);
    let metric = equilibration_metric(&s.c, &model.spec, &s.red, layout, t_max, dy.n_times, &mut rng, s.policy)?;
    let bound = 2.0 * layout.d_system() as f64 / (s.d_r as f64).sqrt();
    out.json(
        "dynamics.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "t_max": t_max,
            "n_times": dy.n_times,
            "d_r": s.d_r,
            "equilibration_metric": metric,
            "bound_2ds_over_sqrt_dr": bound,
            "within_bound": metric <= bound,
        }),
    );
    out.line(format!(
        "dynamics: time-averaged distance to rho_bar = {metric:.6} over T = {t_max:.3e} (2 d_S / sqrt(d_R) = {bound:.6})"
    ));
    Ok(())
}

/// Averages over `draws` model instances for one sweep point.
#[derive(Debug, Clone)]
struct PointRow {
    label: String,
    order: (f64, String),
    values: Vec<f64>,
}

const SWEEP_COLUMNS: [&str; 5] = ["delta", "lhs_i", "lhs_ii", "necessary_lhs", "equilibration_metric"];

fn sweep_point(cfg: &ExperimentConfig, draws: usize) -> Result<Vec<f64>, CliError> {
    let mut acc = vec![0.0; SWEEP_COLUMNS.len()];
    for j in 0..draws {
        let seed = derive_seed(cfg.run.seed, STREAM_SWEEP + 1000 * j as u64);
        let mut cfg_j = cfg.clone();
        cfg_j.run.seed = seed;
        let model = build_model(&cfg_j)?;
        let s = setup(&cfg_j, &model)?;
        let (lhs_i, lhs_ii) = if model.layout.d_system() == 2 {
            theorem2_lhs(&s.red)?
        } else {
            (f64::NAN, f64::NAN)
        };
        let map = BathAverageMap::full(&s.red, s.policy)?;
        let nec = necessary_condition_lhs(&map, cfg.analysis.necessary_starts, derive_seed(seed, STREAM_NECESSARY));
        let mut rng = stream_rng(derive_seed(seed, STREAM_DYNAMICS), 0);
        let metric = equilibration_metric(
            &s.c,
            &model.spec,
            &s.red,
            &model.layout,
            averaging_window(&cfg_j, &model),
            cfg.dynamics.n_times,
            &mut rng,
            s.policy,
        )?;
        let dl = delta(&s.red, &s.subspace, &model.spec)?;
        for (a, v) in acc.iter_mut().zip([dl, lhs_i, lhs_ii, nec.value, metric]) {
            *a += v / draws as f64;
        }
    }
    Ok(acc)
}

fn value_label(v: &toml::Value) -> (String, (f64, String)) {
    match v {
        toml::Value::Integer(i) => (i.to_string(), (*i as f64, String::new())),
        toml::Value::Float(f) => (f.to_string(), (*f, String::new())),
        toml::Value::String(s) => (s.clone(), (f64::NAN, s.clone())),
        other => (other.to_string(), (f64::NAN, other.to_string())),
    }
}

fn sweep(cfg: &ExperimentConfig, jobs: usize, out: &mut Artifacts) -> Result<(), CliError> {
    let Some(sw) = &cfg.sweep else {
        return Err(CliError::Config("sweep needs a [sweep] section".into()));
    };
    let header = format!(
        "# schema_version={SCHEMA_VERSION}\n{},draws,{}\n",
        sw.parameter.replace('.', "_"),
        SWEEP_COLUMNS.join(",")
    );
    let points: Vec<(ExperimentConfig, String, (f64, String))> = sw
        .values
        .iter()
        .map(|v| {
            let (label, order) = value_label(v);
            let literal = match v {
                toml::Value::String(s) => format!("{s:?}"),
                other => other.to_string(),
            };
            let mut point = cfg.with_override(&format!("{}={literal}", sw.parameter))?;
            point.sweep = None;
            Ok((point, label, order))
        })
        .collect::<Result<_, CliError>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let rows: Vec<Result<PointRow, CliError>> = pool.install(|| {
        points
            .par_iter()
            .map(|(point, label, order)| {
                Ok(PointRow {
                    label: label.clone(),
                    order: order.clone(),
                    values: sweep_point(point, sw.draws)?,
                })
            })
            .collect()
    });
    let mut rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let row_text = |r: &PointRow| {
        let cols: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        format!("{},{},{}\n", r.label, sw.draws, cols.join(","))
    };
    for (k, r) in rows.iter().enumerate() {
        out.files.insert(format!("sweep/point_{k:03}.csv"), format!("{header}{}", row_text(r)));
    }
    rows.sort_by(|a, b| a.order.0.total_cmp(&b.order.0).then_with(|| a.order.1.cmp(&b.order.1)));
    let mut merged = header;
    for r in &rows {
        merged.push_str(&row_text(r));
        out.line(format!(
            "sweep: {} = {:<8} lhs_ii = {:.6}  equilibration_metric = {:.6}",
            sw.parameter, r.label, r.values[2], r.values[4]
        ));
    }
    out.files.insert("sweep.csv".into(), merged);
    Ok(())
}

/// Runs the requested stages in order.
pub fn run_stages(cfg: &ExperimentConfig, stages: &[Stage], jobs: usize) -> Result<Artifacts, CliError> {
    let mut out = Artifacts::default();
    out.line(format!("# {} (seed {})", cfg.run.name, cfg.run.seed));
    let needs_model = stages.iter().any(|s| *s != Stage::Sweep);
    let needs_setup = stages
        .iter()
        .any(|s| matches!(s, Stage::Equilibrium | Stage::Bounds | Stage::Dynamics));
    let model = if needs_model { Some(build_model(cfg)?) } else { None };
    let prepared = match (&model, needs_setup) {
        (Some(m), true) => Some(setup(cfg, m)?),
        _ => None,
    };
    for stage in stages {
        match (stage, &model, &prepared) {
            (Stage::ModelInfo, Some(m), _) => model_info(cfg, m, &mut out)?,
            (Stage::Spectrum, Some(m), _) => spectrum(cfg, m, &mut out)?,
            (Stage::Equilibrium, Some(m), Some(s)) => equilibrium(cfg, m, s, &mut out)?,
            (Stage::Bounds, Some(m), Some(s)) => bounds(cfg, m, s, &mut out)?,
            (Stage::Dynamics, Some(m), Some(s)) => dynamics(cfg, m, s, &mut out)?,
            (Stage::Sweep, _, _) => sweep(cfg, jobs, &mut out)?,
            _ => unreachable!("model and setup are built for every stage that needs them"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text, "test", PathBuf::new(), &[]).unwrap()
    }

    #[test]
    fn small_commuting_run_has_every_artifact() {
        let c = cfg("[model]\nkind = \"commuting\"\nd_bath = 8\n[analysis]\nmc_samples = 200\nnecessary_starts = 16\n[dynamics]\nn_times = 200\n");
        let stages = [Stage::ModelInfo, Stage::Spectrum, Stage::Equilibrium, Stage::Bounds, Stage::Dynamics];
        let a = run_stages(&c, &stages, 1).unwrap();
        for name in [
            "model.json",
            "spectrum.csv",
            "spectrum.json",
            "reductions.csv",
            "eth.csv",
            "equilibrium.json",
            "bounds.csv",
            "report_T2ii.json",
            "report_SufficientISI.json",
            "trajectory.csv",
            "dynamics.json",
        ] {
            assert!(a.files.contains_key(name), "missing {name}");
        }
        assert!(a.summary_text().contains("accuracy better than ≈ 1/3"));
    }

    #[test]
    fn degenerate_spectrum_refused_then_overridden() {
        let dir = tempdir_with_matrix("hmatrix 1\ndims 4 4\nlayout system_slow 2 2\n1 0\n0 0\n0 0\n0 0\n0 0\n1 0\n0 0\n0 0\n0 0\n0 0\n-1 0\n0 0\n0 0\n0 0\n0 0\n2 0\n");
        let text = "[model]\nkind = \"file\"\npath = \"h.hmat\"\n[analysis]\nmc_samples = 50\n";
        let mut c = ExperimentConfig::parse(text, "t", dir.clone(), &[]).unwrap();
        let err = run_stages(&c, &[Stage::Equilibrium], 1).err().expect("degenerate levels refused");
        assert_eq!(err.exit_code(), 4);
        c.analysis.degeneracy = DegeneracyPolicy::Symmetrize;
        let a = run_stages(&c, &[Stage::Equilibrium], 1).unwrap();
        assert!(a.summary_text().contains("hypothesis violated"));
        std::fs::remove_dir_all(dir).unwrap();
    }

    fn tempdir_with_matrix(text: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("isi-cli-unit-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("h.hmat"), text).unwrap();
        dir
    }
}
