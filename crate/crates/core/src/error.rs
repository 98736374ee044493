use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid regularity class: {0}")]
    InvalidRegularity(String),
    #[error("rate constant is only explicit for the Hölder class")]
    SmoothConstantNotExplicit,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("sample {index} at {point:?} lies outside the partition domain")]
    SampleOutOfDomain { index: usize, point: Vec<f64> },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("transport solve failed: {0}")]
    TransportInfeasible(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid loss usage: {0}")]
    InvalidLoss(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("empty gradient field")]
    EmptyField,
    #[error("invalid bound inputs: {0}")]
    InvalidBoundInputs(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
