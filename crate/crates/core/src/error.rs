//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode count must be at least 1")]
    EmptyState,

    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("gate modes must differ (mode {0} repeated)")]
    DegenerateModes(usize),

    #[error("parameter {name} = {value} outside {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("matrix is not Hermitian (residue {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not symmetric (residue {0:.3e})")]
    NotSymmetric(f64),

    #[error("photon-number matrix not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),

    #[error("state violates the bosonic uncertainty relation (min eigenvalue of sigma + i*Omega/2 is {0:.3e})")]
    Unphysical(f64),

    #[error("dimension mismatch: expected {expected} modes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("moment of a Hermitian observable came out complex (imaginary residue {0:.3e})")]
    ImaginaryResidue(f64),

    #[error("query length {len} exceeds the enumeration cap of {cap} observables")]
    QueryTooLong { len: usize, cap: usize },

    #[error("query observables on overlapping modes do not commute")]
    NonCommutingQuery,

    #[error("variance is zero; correlation undefined")]
    ZeroVariance,

    #[error("moment tensor over {modes} spatial modes exceeds the cap of {cap}")]
    TensorTooLarge { modes: usize, cap: usize },

    #[error("cluster vertex {0} has no polarized mode pair in the state")]
    UnmappedVertex(usize),

    #[error("circuit not supported by the Fock oracle: {0}")]
    UnsupportedCircuit(String),

    #[error("Fock tensor would need {bytes} bytes (limit {limit})")]
    CapacityExceeded { bytes: usize, limit: usize },

    #[error("query touches ancilla mode {0}")]
    AncillaQuery(usize),

    #[error("query of ladder degree {degree} not supported by the sampler (cap {cap})")]
    UnsupportedDegree { degree: usize, cap: usize },

    #[error("construction does not support this size: {0}")]
    UnsupportedSize(String),

    #[error("{0}")]
    Parse(#[from] ParseError),
}

/// Positioned error from the circuit DSL parser.
#[derive(Debug, Error, Clone)]
#[error("parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, Error>;
