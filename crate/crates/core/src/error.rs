use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("Pauli index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: u64, n: u32 },

    #[error("unsupported qubit count {0}")]
    QubitCount(u32),

    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: u32, right: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rank {rank} out of range for dimension {dim}")]
    RankOutOfRange { rank: usize, dim: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not Hermitian (relative defect {0:e})")]
    NotHermitian(f64),

    #[error("state is not physical: {0}")]
    NonPhysical(String),

    #[error("operator contains duplicate Pauli labels (first repeat at position {0})")]
    DuplicateLabels(usize),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
