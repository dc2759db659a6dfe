use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty tensor product")]
    EmptyTensor,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid neighborhood structure: {0}")]
    InvalidStructure(String),

    #[error("kernel may be empty: the neighborhood structure is trivial")]
    TrivialStructure,

    #[error("locality violation: {0}")]
    LocalityViolation(String),

    #[error("non-Hermitian Hamiltonian term: {0}")]
    NonHermitian(String),

    #[error("matrix exponential failed: {0}")]
    Expm(String),

    #[error("state not physical: {0}")]
    NotPhysical(String),

    #[error("gramian singular: {0}")]
    GramianSingular(String),

    #[error("insufficient horizon: {0}")]
    InsufficientHorizon(String),

    #[error("constraints infeasible at every relaxation level; worst violations: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed record: {0}")]
    Record(String),
}

pub type Result<T> = std::result::Result<T, Error>;
