use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one failure class of
/// the command-line runner (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NonHermitianInput { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("displacement vector has zero length")]
    ZeroDisplacement,

    #[error("{count} bath spins exceed the cap of {cap}")]
    TooManySpins { count: usize, cap: usize },

    #[error("{which} has zero norm")]
    ZeroOperator { which: &'static str },

    #[error("map is not a channel: {0}")]
    NotAChannel(String),

    #[error("fixed-point block structure is ambiguous (singular value {gap:.3e} inside the degeneracy band)")]
    NumericalDegeneracy { gap: f64 },

    #[error("index {index} out of range for a spectrum of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("resolvent is singular (smallest singular value {min_singular_value:.3e})")]
    SingularResolvent { min_singular_value: f64 },

    #[error("trajectory {trajectory}: selected branch at step {step} has probability {probability:.3e}")]
    ZeroProbabilityBranch {
        trajectory: u64,
        step: usize,
        probability: f64,
    },

    #[error("trajectory {trajectory}: conditional state left the density-matrix set at step {step} ({detail})")]
    InvalidState {
        trajectory: u64,
        step: usize,
        detail: String,
    },

    #[error("enumeration over m = {m} exceeds the cap of {cap}")]
    TooLarge { m: usize, cap: usize },

    #[error("B and H_e do not commute (relative residual {residual:.3e})")]
    NotCommuting { residual: f64 },

    #[error("negative dissipation rate {rate}")]
    NegativeRate { rate: f64 },

    #[error("composite dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 config, 3 numerical validation, 4 resource cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) => 2,
            Error::TooManySpins { .. } | Error::TooLarge { .. } | Error::DimensionCap { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
