use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected} qubits, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid Pauli text {0:?}: expected characters from I, X, Y, Z")]
    PauliParse(String),

    #[error("invalid basis text {0:?}: expected characters from x, y, z")]
    BasisParse(String),

    #[error("qubit count {0} is outside the supported range 1..=64")]
    QubitCount(usize),

    #[error("bit string value {value:#x} does not fit in {n} bits")]
    BitsOverflow { n: usize, value: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested {requested} terms but only {available} weight-<={k} Paulis exist on {n} qubits")]
    TooManyTerms {
        requested: usize,
        available: usize,
        k: usize,
        n: usize,
    },

    #[error("term {pauli} violates the declared model: {reason}")]
    ModelViolation { pauli: String, reason: String },

    #[error("dense limit exceeded: {n} qubits > limit {limit}")]
    DenseLimitExceeded { n: usize, limit: usize },

    #[error("bit string b must be nonzero for a phase estimation experiment")]
    ZeroBitString,

    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("measurement mean {mean} leaves [-1, 1]; bias too large for this experiment")]
    MeanOutOfRange { mean: f64 },

    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
