//! Experiment configuration: TOML with one level of `[section]` tables.
//! Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};

use isi_core::equilibrium::DegeneracyPolicy;
use isi_core::theorems::TheoremId;
use isi_core::Tolerances;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Seed used when neither the config nor `--seed` gives one.
pub const DEFAULT_SEED: u64 = 20_090_519;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSection,
    pub model: ModelSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Directory that relative paths in the config are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    ModelInfo,
    Spectrum,
    Equilibrium,
    Bounds,
    Dynamics,
    Sweep,
}

pub const ALL_STAGES: [Stage; 6] = [
    Stage::ModelInfo,
    Stage::Spectrum,
    Stage::Equilibrium,
    Stage::Bounds,
    Stage::Dynamics,
    Stage::Sweep,
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub name: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Stages executed by `run`; `sweep` only when a `[sweep]` section exists.
    pub stages: Vec<Stage>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: DEFAULT_SEED,
            out: None,
            stages: ALL_STAGES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Qubit coupled through mutually commuting bath operators.
    Commuting,
    /// Qubit dephasing against a bath of independent spins.
    Cucchietti,
    /// Independent Gaussian Hermitian `H_S`, `H_B`, `H_SB`.
    Random,
    /// Total Hamiltonian read from a matrix file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Closed form where the model has one, dense otherwise.
    Analytic,
    Dense,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default)]
    pub d_system: Option<usize>,
    #[serde(default)]
    pub d_bath: Option<usize>,
    #[serde(default)]
    pub n_spins: Option<usize>,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "one")]
    pub coupling_scale: f64,
    #[serde(default = "one")]
    pub energy_scale: f64,
    #[serde(default = "one")]
    pub interaction_strength: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "analytic")]
    pub solver: Solver,
    /// Also write the total Hamiltonian as a matrix file.
    #[serde(default)]
    pub export_matrix: bool,
}

fn one() -> f64 {
    1.0
}

fn analytic() -> Solver {
    Solver::Analytic
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsPrimeMode {
    Target,
    Formula,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub theorems: Vec<TheoremId>,
    pub mc_samples: usize,
    pub mc_streams: u64,
    /// Dimension of the bath subspace `B_R` spanned by the first `d_r` bath
    /// basis states; the whole bath when absent.
    pub d_r: Option<usize>,
    pub epsilon: f64,
    pub p: f64,
    pub eps_prime: EpsPrimeMode,
    pub eps_prime_target: f64,
    pub sufficient_threshold: f64,
    pub degeneracy: DegeneracyPolicy,
    pub necessary_starts: usize,
    pub eth: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            theorems: vec![
                TheoremId::T0i,
                TheoremId::T0ii,
                TheoremId::T1,
                TheoremId::T1prime,
                TheoremId::T2i,
                TheoremId::T2ii,
                TheoremId::Popescu,
                TheoremId::SufficientIsi,
            ],
            mc_samples: 10_000,
            mc_streams: 8,
            d_r: None,
            epsilon: 0.1,
            p: 1.0,
            eps_prime: EpsPrimeMode::Target,
            eps_prime_target: 0.1,
            sufficient_threshold: isi_core::theorems::SUFFICIENT_THRESHOLD,
            degeneracy: DegeneracyPolicy::Refuse,
            necessary_starts: isi_core::theorems::DEFAULT_STARTS,
            eth: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    /// Averaging window in units of the inverse smallest level spacing.
    pub t_factor: f64,
    pub n_times: usize,
    pub trajectory_points: usize,
    /// Length of the exported trajectory.
    pub trajectory_span: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            t_factor: 1000.0,
            n_times: 2000,
            trajectory_points: 201,
            trajectory_span: 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `section.key` of the swept setting.
    pub parameter: String,
    pub values: Vec<toml::Value>,
    /// Independent model draws averaged at each point.
    #[serde(default = "default_draws")]
    pub draws: usize,
}

fn default_draws() -> usize {
    8
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |k| before.len() - k - 1) + 1;
    (line, col)
}

fn parse_error(origin: &str, text: &str, err: &toml::de::Error) -> CliError {
    let message = err.message().replace('\n', " ");
    match err.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            CliError::Config(format!("{origin}:{line}:{col}: {message}"))
        }
        None => CliError::Config(format!("{origin}: {message}")),
    }
}

/// Sets `section.key` in a parsed table. The value is
/// read as a TOML literal, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    match parts.as_slice() {
        [section, field] if !section.is_empty() && !field.is_empty() => {
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let sub = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("override {key:?}: {section:?} is not a section")))?;
            sub.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("override key {key:?} must look like section.key"))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), base, overrides)
    }

    pub fn parse(text: &str, origin: &str, base_dir: PathBuf, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| parse_error(origin, text, &e))?;
        if !overrides.is_empty() {
            let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(origin, text, &e))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            cfg = toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Config(format!("{origin} (after overrides): {}", e.message())))?;
        }
        cfg.base_dir = base_dir;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The same configuration with one more override applied.
    pub fn with_override(&self, assignment: &str) -> Result<Self, CliError> {
        let mut table = toml::Table::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        apply_override(&mut table, assignment)?;
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("override {assignment:?}: {}", e.message())))?;
        cfg.base_dir = self.base_dir.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let m = &self.model;
        match m.kind {
            ModelKind::Commuting => {
                if m.d_bath.is_none() {
                    return bad("model.kind = \"commuting\" needs model.d_bath".into());
                }
                if m.d_system.is_some_and(|d| d != 2) {
                    return bad("the commuting model has d_system = 2".into());
                }
            }
            ModelKind::Cucchietti => {
                if m.n_spins.is_none() {
                    return bad("model.kind = \"cucchietti\" needs model.n_spins".into());
                }
            }
            ModelKind::Random => {
                if m.d_bath.is_none() {
                    return bad("model.kind = \"random\" needs model.d_bath".into());
                }
            }
            ModelKind::File => {
                if m.path.is_none() {
                    return bad("model.kind = \"file\" needs model.path".into());
                }
            }
        }
        if m.d_bath == Some(0) || m.d_system.is_some_and(|d| d < 2) {
            return bad("model dimensions must be d_system >= 2 and d_bath >= 1".into());
        }
        let a = &self.analysis;
        if a.mc_samples < 2 {
            return bad(format!("analysis.mc_samples = {}, need at least 2", a.mc_samples));
        }
        if a.d_r == Some(0) {
            return bad("analysis.d_r must be positive".into());
        }
        if !(a.epsilon > 0.0) || !(0.0..=1.0).contains(&a.p) || !(a.eps_prime_target > 0.0) {
            return bad("analysis.epsilon and eps_prime_target must be positive, analysis.p in [0, 1]".into());
        }
        let d = &self.dynamics;
        if d.n_times < 100 {
            return bad(format!("dynamics.n_times = {}, need at least 100", d.n_times));
        }
        if !(d.t_factor > 0.0) || !(d.trajectory_span >= 0.0) || d.trajectory_points == 0 {
            return bad("dynamics.t_factor must be positive and trajectory_points nonzero".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() || s.draws == 0 {
                return bad("sweep needs at least one value and one draw".into());
            }
            if s.parameter.starts_with("sweep.") {
                return bad("sweep.parameter cannot name a sweep setting".into());
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}
