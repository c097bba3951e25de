use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, Stage};
use crate::error::CliError;
use crate::pipeline::{run_stages, Artifacts};

#[derive(Debug, Parser)]
#[command(name = "isi", version, about = "Equilibration and initial-state-independence experiments")]
pub struct Cli {
    /// Experiment config (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides run.seed
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Threads for sweep points
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    pub jobs: usize,
    /// Output directory (default: run.out, else isi-out/<run.name>)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// section.key=value, applied after the config file
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Model parameters and norm
    ModelInfo,
    /// Eigenvalues and degeneracy checks
    Spectrum,
    /// Eigenstate reductions, delta, time-averaged state
    Equilibrium,
    /// Theorem reports
    Bounds,
    /// Trajectory and equilibration metric
    Dynamics,
    /// Parameter grid from the [sweep] section
    Sweep,
    /// Every stage listed in run.stages
    Run,
}

impl Command {
    fn stages(self, cfg: &ExperimentConfig) -> Vec<Stage> {
        match self {
            Command::ModelInfo => vec![Stage::ModelInfo],
            Command::Spectrum => vec![Stage::Spectrum],
            Command::Equilibrium => vec![Stage::Equilibrium],
            Command::Bounds => vec![Stage::Bounds],
            Command::Dynamics => vec![Stage::Dynamics],
            Command::Sweep => vec![Stage::Sweep],
            Command::Run => cfg
                .run
                .stages
                .iter()
                .copied()
                .filter(|s| *s != Stage::Sweep || cfg.sweep.is_some())
                .collect(),
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    ExperimentConfig::from_file(path, &overrides)
}

pub fn write_artifacts(dir: &Path, artifacts: &Artifacts) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, text) in &artifacts.files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
        std::fs::write(&path, text).map_err(io(&path))?;
    }
    let path = dir.join("summary.txt");
    std::fs::write(&path, artifacts.summary_text()).map_err(io(&path))?;
    Ok(())
}

/// Parses, runs and writes; returns the artifacts and where they went.
pub fn execute(cli: &Cli) -> Result<(PathBuf, Artifacts), CliError> {
    let cfg = load_config(cli)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| Path::new("isi-out").join(&cfg.run.name));
    let artifacts = run_stages(&cfg, &cli.command.stages(&cfg), cli.jobs)?;
    write_artifacts(&dir, &artifacts)?;
    Ok((dir, artifacts))
}

/// Process entry point; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((dir, artifacts)) => {
            print!("{}", artifacts.summary_text());
            println!("wrote {} files to {}", artifacts.files.len() + 1, dir.display());
            0
        }
        Err(e) => {
            eprintln!("isi: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
