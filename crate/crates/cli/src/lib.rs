//! Experiment runner: a TOML config drives model construction, spectral
//! checks, equilibrium quantities, theorem reports, dynamics and parameter
//! sweeps, and every stage writes deterministic CSV/JSON data files.

pub mod app;
pub mod config;
pub mod error;
pub mod pipeline;

pub use app::main_with_args;
pub use config::ExperimentConfig;
pub use error::CliError;
