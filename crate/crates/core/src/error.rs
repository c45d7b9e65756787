use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare { op: &'static str, rows: usize, cols: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("vector is not normalized: squared norm {0}")]
    NotNormalized(f64),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
    #[error("assignment space of {outcomes}^{measurements} exceeds the enumeration guard")]
    TooManyAssignments { measurements: usize, outcomes: usize },
    #[error("cycle size {n} not allowed here: {reason}")]
    InvalidCycleSize { n: usize, reason: &'static str },
    #[error("flip mask covers {mask} measurements, scenario has {scenario}")]
    MaskMismatch { mask: usize, scenario: usize },

    #[error("unknown measurement label {0}")]
    UnknownLabel(usize),
    #[error("projectors {i} and {j} do not commute (commutator norm {norm:e})")]
    NonCommuting { i: usize, j: usize, norm: f64 },
    #[error("invalid realization: {0}")]
    InvalidRealization(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("unknown stage {0:?}")]
    UnknownStage(String),
    #[error("record A{record} is not readable at stage {stage:?}")]
    RecordNotReadable { record: usize, stage: String },
    #[error("commutation certificate failed for {what} (norm {norm:e})")]
    CertificateFailure { what: String, norm: f64 },

    #[error("oracle key sets differ for {0}")]
    OracleKeyMismatch(String),
    #[error("malformed json: {0}")]
    Json(String),
}
