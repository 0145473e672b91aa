use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("{0} qubits exceeds the supported maximum of {max}", max = crate::linalg::MAX_QUBITS)]
    TooManyQubits(usize),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("generator is not self-inverse and Hermitian")]
    NotSelfInverse,

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid command: {0}")]
    InvalidCommand(String),

    #[error("sampled outcome {0} has zero probability")]
    ImpossibleOutcome(u8),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("retry limit of {0} attempts exceeded")]
    RetryLimit(u32),

    #[error("transport: {0}")]
    Transport(#[from] std::io::Error),

    #[error("malformed frame: {0}")]
    Frame(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
