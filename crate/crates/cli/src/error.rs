use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] isi_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration problems, 3 for dimension caps, 4 for a refused
    /// degenerate spectrum, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(isi_core::Error::CapExceeded { .. }) => 3,
            CliError::Core(isi_core::Error::DegenerateSpectrum { .. }) => 4,
            CliError::Core(isi_core::Error::MatrixFormat { .. }) => 2,
            _ => 1,
        }
    }
}
