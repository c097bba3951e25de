use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("state is not normalized: |psi| = {norm}")]
    NotNormalized { norm: f64 },

    #[error("matrix is not Hermitian: max |A - A^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("density matrix has trace {trace} (expected 1)")]
    BadTrace { trace: f64 },

    #[error("density matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("Bloch vector length {length} exceeds 1")]
    BlochOutOfRange { length: f64 },

    #[error("subspace basis is not orthonormal: max |B^dagger B - I| = {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("empty subspace (d_R = 0)")]
    EmptySubspace,

    #[error("Monte Carlo needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("functional returned a non-finite value at sample {sample} of stream {stream}")]
    NonFinite { stream: u64, sample: usize },

    #[error("eigendecomposition did not converge for a {dim}x{dim} matrix")]
    NoConvergence { dim: usize },

    #[error("dimension {dim} exceeds the configured cap {cap} for {what}")]
    CapExceeded { what: &'static str, dim: usize, cap: usize },

    #[error("degenerate spectrum: levels {levels:?} collide (spacing {spacing:e}); pass an override to continue")]
    DegenerateSpectrum { levels: Vec<usize>, spacing: f64 },

    #[error("closed-form average has trace {trace} (deviation {deviation:e} from 1)")]
    Normalization { trace: f64, deviation: f64 },

    #[error("1-D minimization ended at a bracket endpoint: beta in [{lo}, {hi}], best {best}")]
    NonConvergentFit { lo: f64, hi: f64, best: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix file, line {line}: {message}")]
    MatrixFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
