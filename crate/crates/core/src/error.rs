use thiserror::Error;

/// Errors shared by every module in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown label `{label}` at level {level}")]
    UnknownLabel { label: String, level: u8 },

    #[error("cannot map level {from} to finer level {to}; mapping only goes coarser")]
    InvalidDirection { from: u8, to: u8 },

    #[error("parse error{}: {msg}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },

    #[error("duplicate id `{id}`")]
    DuplicateId { id: String },

    #[error("record `{id}` has no label resolvable at level {level}")]
    MissingLabel { id: String, level: u8 },

    #[error("class `{class}` has {available} samples, {requested} requested")]
    InsufficientSamples {
        class: String,
        available: usize,
        requested: usize,
    },

    #[error("feature store is missing ids: {}", ids.join(", "))]
    MissingFeature { ids: Vec<String> },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("invalid model shape: {0}")]
    InvalidShape(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("self-directed training requires a non-empty clean seed set")]
    EmptyCleanSet,

    #[error("division domain error: {0}")]
    DivisionDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no {kind} concept annotations present in the manifest")]
    NoConcepts { kind: String },

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported report format `{0}`")]
    UnsupportedFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
