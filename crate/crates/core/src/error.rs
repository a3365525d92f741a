use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian: max |A - A^dagger| = {defect:e}")]
    NotHermitian { defect: f64 },

    #[error("operator has non-finite entries")]
    NonFinite,

    #[error("operator must be square with dimension >= 1, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("negative eigenvalue {value:e} beyond tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("POVM element eigenvalue {value:e} outside [0, 1]")]
    InvalidPovm { value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("tensor product dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error(
        "displacement unitarity defect {defect:e} exceeds 0.01 on the kept block; \
         increase construction_dim (currently {construction_dim})"
    )]
    UnitarityDefect { defect: f64, construction_dim: usize },

    #[error("truncation mass loss: trace {trace} < 1 - 1e-6 at cutoff {cutoff}; increase the Fock cutoff")]
    TruncationLoss { trace: f64, cutoff: usize },

    #[error("typical set enumeration exceeds cap of {cap} sequences")]
    TypicalSetCap { cap: usize },

    #[error("pool size {size} exceeds cap {cap}; reduce R_P to at most {max_rate:.6} nats")]
    PoolCap { size: usize, cap: usize, max_rate: f64 },

    #[error(
        "decoder for message {message} needs {generators} generators (cap {cap}); \
         use a smaller binning rate or block length"
    )]
    SubspaceCap { message: usize, generators: usize, cap: usize },

    #[error("bin for message {message} is empty")]
    EmptyBin { message: usize },

    #[error(
        "design condition violated at receiver {receiver}: binning rate {bin_rate} >= \
         mutual information {information} (nats)"
    )]
    DesignCondition { receiver: usize, bin_rate: f64, information: f64 },

    #[error("could not draw a codeword satisfying the energy constraint after {attempts} attempts")]
    EnergyConstraint { attempts: usize },

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }
}
