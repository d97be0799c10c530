use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{n_qubits} qubits exceeds the dense limit of {limit}")]
    DenseLimit { n_qubits: usize, limit: usize },

    #[error("qubit index {index} is out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("invalid Pauli string `{0}`")]
    ParsePauli(String),

    #[error("invalid ladder descriptor `{0}`")]
    ParseLadder(String),

    #[error("invalid basis state `{0}`")]
    ParseBasisState(String),

    #[error("the identity cannot be compiled into an entangling sequence")]
    IdentityGenerator,

    #[error("exponent terms do not act identically on the reference: {0}")]
    UnequalAction(String),

    #[error("invalid qubit subset: {0}")]
    InvalidSubset(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("missing measurement data for setting {0}")]
    MissingSetting(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid table: {0}")]
    Table(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("evaluation {index} failed: {source}")]
    Evaluation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
